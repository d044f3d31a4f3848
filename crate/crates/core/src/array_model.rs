//! Uniform linear array steering model with mutual coupling.
//!
//! The array output at one snapshot is `y = M_MC · A_st · x + n`, where
//! `A_st` holds one plane-wave steering vector per grid angle and `M_MC` is a
//! banded symmetric Toeplitz coupling matrix. Estimators work on the stacked
//! real form `[Re y; Im y] = [[Re A, -Im A]; [Im A, Re A]] · [Re x; Im x]`.

use std::f64::consts::PI;

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// Antenna layout of a uniform linear array.
///
/// Positions are measured from the first antenna in wavelengths, so the
/// phase of antenna `m` for a wave from `theta` is `2π·d_m·cos(theta)`.
/// This is the `μ_m·Ω` product of the sampled-time description with
/// `μ_m = d_m / (c·T_s)` and `Ω = ω·T_s`.
#[derive(Clone, Debug, PartialEq)]
pub struct ArrayGeometry {
    spacing: f64,
    positions: Vec<f64>,
}

impl ArrayGeometry {
    pub fn uniform(antennas: usize, spacing_wavelengths: f64) -> Result<Self> {
        if antennas == 0 {
            return Err(Error::Config("array needs at least one antenna".into()));
        }
        if !(spacing_wavelengths > 0.0 && spacing_wavelengths.is_finite()) {
            return Err(Error::Config(format!(
                "antenna spacing must be positive, got {spacing_wavelengths}"
            )));
        }
        let positions = (0..antennas).map(|m| m as f64 * spacing_wavelengths).collect();
        Ok(Self {
            spacing: spacing_wavelengths,
            positions,
        })
    }

    /// Twenty antennas at half-wavelength spacing.
    pub fn half_wavelength(antennas: usize) -> Self {
        Self::uniform(antennas, 0.5).expect("valid default geometry")
    }

    pub fn antennas(&self) -> usize {
        self.positions.len()
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Distances `d_m` from antenna 1, in wavelengths.
    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    /// Per-antenna phase slopes `μ_m·Ω` in radians, multiplying `cos(theta)`.
    pub fn phase_slopes(&self) -> Vec<f64> {
        self.positions.iter().map(|d| 2.0 * PI * d).collect()
    }
}

/// Banded symmetric Toeplitz mutual-coupling description.
///
/// `reach` is the antenna separation (in elements) at and beyond which
/// coupling vanishes. `rho[i]` and `phi[i]` describe the band at lag `i + 1`,
/// so `reach - 1` coefficients are required.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingSpec {
    #[serde(rename = "D")]
    pub reach: usize,
    #[serde(default)]
    pub rho: Vec<f64>,
    #[serde(default)]
    pub phi: Vec<f64>,
}

impl CouplingSpec {
    pub fn none() -> Self {
        Self {
            reach: 1,
            rho: Vec::new(),
            phi: Vec::new(),
        }
    }

    /// Amplitudes and phases linearly spread from the first to the last
    /// coupled lag.
    pub fn spread(reach: usize, rho: (f64, f64), phi: (f64, f64)) -> Self {
        let bands = reach.saturating_sub(1);
        let lerp = |(a, b): (f64, f64), i: usize| {
            if bands <= 1 {
                a
            } else {
                a + (b - a) * i as f64 / (bands - 1) as f64
            }
        };
        Self {
            reach,
            rho: (0..bands).map(|i| lerp(rho, i)).collect(),
            phi: (0..bands).map(|i| lerp(phi, i)).collect(),
        }
    }

    /// `m_i = rho_i · exp(j·phi_i)` for lags `1..reach`.
    pub fn band_values(&self) -> Vec<C64> {
        self.rho
            .iter()
            .zip(&self.phi)
            .map(|(&r, &p)| C64::from_polar(r, p))
            .collect()
    }

    fn validate(&self, antennas: usize) -> Result<()> {
        if self.reach == 0 {
            return Err(Error::Config("coupling reach D must be at least 1".into()));
        }
        if self.reach > antennas {
            return Err(Error::Config(format!(
                "coupling reach D = {} exceeds antenna count {antennas}",
                self.reach
            )));
        }
        let need = self.reach - 1;
        if self.rho.len() != need || self.phi.len() != need {
            return Err(Error::Config(format!(
                "coupling reach D = {} needs {need} amplitudes and phases, got {} and {}",
                self.reach,
                self.rho.len(),
                self.phi.len()
            )));
        }
        if self.rho.iter().chain(&self.phi).any(|v| !v.is_finite()) {
            return Err(Error::Config("non-finite coupling coefficient".into()));
        }
        Ok(())
    }
}

/// Steering vector `a(theta)` with entries `exp(-j·μ_m·Ω·cos theta)`.
pub fn steering_vector(geom: &ArrayGeometry, theta_deg: f64) -> Result<DVector<C64>> {
    if !(0.0..=180.0).contains(&theta_deg) {
        return Err(Error::Domain(format!("angle {theta_deg}° outside [0°, 180°]")));
    }
    let c = theta_deg.to_radians().cos();
    Ok(DVector::from_iterator(
        geom.antennas(),
        geom.phase_slopes()
            .into_iter()
            .map(|slope| C64::from_polar(1.0, -slope * c)),
    ))
}

/// Builds the `M × M` symmetric Toeplitz coupling matrix.
pub fn coupling_matrix(spec: &CouplingSpec, antennas: usize) -> Result<DMatrix<C64>> {
    spec.validate(antennas)?;
    let bands = spec.band_values();
    Ok(DMatrix::from_fn(antennas, antennas, |r, c| {
        let lag = r.abs_diff(c);
        match lag {
            0 => C64::new(1.0, 0.0),
            l if l < spec.reach => bands[l - 1],
            _ => C64::new(0.0, 0.0),
        }
    }))
}

/// Angular search grid with its steering and effective (coupled) matrices.
#[derive(Clone, Debug)]
pub struct SteeringGrid {
    thetas: Vec<f64>,
    step: f64,
    a_st: DMatrix<C64>,
    a: DMatrix<C64>,
}

impl SteeringGrid {
    /// Grid over `[0°, 180°]` every `step_deg` degrees.
    pub fn new(geom: &ArrayGeometry, coupling: &CouplingSpec, step_deg: f64) -> Result<Self> {
        if !(step_deg > 0.0 && step_deg <= 180.0) {
            return Err(Error::Config(format!("grid step {step_deg}° out of range")));
        }
        let count = (180.0 / step_deg).round() as usize + 1;
        if ((count - 1) as f64 * step_deg - 180.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "grid step {step_deg}° does not divide 180°"
            )));
        }
        let thetas: Vec<f64> = (0..count).map(|i| i as f64 * step_deg).collect();
        let mut a_st = DMatrix::zeros(geom.antennas(), count);
        for (n, &t) in thetas.iter().enumerate() {
            a_st.set_column(n, &steering_vector(geom, t)?);
        }
        let mc = coupling_matrix(coupling, geom.antennas())?;
        let a = &mc * &a_st;
        Ok(Self {
            thetas,
            step: step_deg,
            a_st,
            a,
        })
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    pub fn antennas(&self) -> usize {
        self.a.nrows()
    }

    pub fn steering(&self) -> &DMatrix<C64> {
        &self.a_st
    }

    pub fn effective(&self) -> &DMatrix<C64> {
        &self.a
    }

    /// Nearest grid index for an angle in degrees.
    pub fn index_of(&self, theta_deg: f64) -> Option<usize> {
        if !(0.0..=180.0).contains(&theta_deg) {
            return None;
        }
        Some(((theta_deg / self.step).round() as usize).min(self.len() - 1))
    }

    /// Stacked real design matrix for this grid.
    pub fn realified(&self) -> DMatrix<f64> {
        realify_matrix(&self.a)
    }
}

/// One synthesized array output.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub y: DVector<C64>,
    pub sigma2_true: f64,
}

/// `y = A·x + n` with independent `N(0, sigma2)` on every real and imaginary
/// noise component.
pub fn synthesize_snapshot<R: Rng + ?Sized>(
    grid: &SteeringGrid,
    x: &DVector<C64>,
    sigma2: f64,
    rng: &mut R,
) -> Result<Snapshot> {
    if x.len() != grid.len() {
        return Err(Error::Dimension(format!(
            "signal has {} entries, grid has {}",
            x.len(),
            grid.len()
        )));
    }
    if !(sigma2 >= 0.0 && sigma2.is_finite()) {
        return Err(Error::Domain(format!("noise variance {sigma2} must be >= 0")));
    }
    let sd = sigma2.sqrt();
    let mut y = grid.effective() * x;
    for v in y.iter_mut() {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *v += C64::new(sd * re, sd * im);
    }
    Ok(Snapshot {
        y,
        sigma2_true: sigma2,
    })
}

/// Real-valued stacked linear system.
#[derive(Clone, Debug, PartialEq)]
pub struct RealifiedSystem {
    pub a_tilde: DMatrix<f64>,
    pub y_tilde: DVector<f64>,
}

pub fn realify_matrix(a: &DMatrix<C64>) -> DMatrix<f64> {
    let (m, n) = a.shape();
    let mut out = DMatrix::zeros(2 * m, 2 * n);
    for c in 0..n {
        for r in 0..m {
            let v = a[(r, c)];
            out[(r, c)] = v.re;
            out[(r, n + c)] = -v.im;
            out[(m + r, c)] = v.im;
            out[(m + r, n + c)] = v.re;
        }
    }
    out
}

/// `[Re v; Im v]`.
pub fn stack(v: &DVector<C64>) -> DVector<f64> {
    let n = v.len();
    DVector::from_fn(2 * n, |i, _| if i < n { v[i].re } else { v[i - n].im })
}

/// Inverse of [`stack`]: entry `n` is `v[n] + j·v[N + n]`.
pub fn unstack(v: &DVector<f64>) -> DVector<C64> {
    let n = v.len() / 2;
    DVector::from_fn(n, |i, _| C64::new(v[i], v[n + i]))
}

pub fn realify(a: &DMatrix<C64>, y: &DVector<C64>) -> Result<RealifiedSystem> {
    if a.nrows() != y.len() {
        return Err(Error::Dimension(format!(
            "matrix has {} rows, measurement has {} entries",
            a.nrows(),
            y.len()
        )));
    }
    Ok(RealifiedSystem {
        a_tilde: realify_matrix(a),
        y_tilde: stack(y),
    })
}

/// JSON description of the array and its coupling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArrayConfig {
    pub m: usize,
    pub delta_d_wavelengths: f64,
    pub coupling: CouplingSpec,
    #[serde(default = "default_grid_step")]
    pub grid_step_deg: f64,
}

fn default_grid_step() -> f64 {
    1.0
}

impl ArrayConfig {
    /// Twenty antennas at λ/2 with two coupled bands.
    pub fn standard() -> Self {
        Self {
            m: 20,
            delta_d_wavelengths: 0.5,
            coupling: CouplingSpec {
                reach: 3,
                rho: vec![0.65, 0.25],
                phi: vec![PI / 7.0, PI / 10.0],
            },
            grid_step_deg: 1.0,
        }
    }

    /// Thirty-nine antennas at λ/4, same aperture, coupling spread over eight bands.
    pub fn quarter_wavelength() -> Self {
        Self {
            m: 39,
            delta_d_wavelengths: 0.25,
            coupling: CouplingSpec::spread(9, (0.65, 0.25), (PI / 7.0, PI / 10.0)),
            grid_step_deg: 1.0,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.build()?;
        Ok(cfg)
    }

    pub fn geometry(&self) -> Result<ArrayGeometry> {
        ArrayGeometry::uniform(self.m, self.delta_d_wavelengths)
    }

    pub fn build(&self) -> Result<SteeringGrid> {
        SteeringGrid::new(&self.geometry()?, &self.coupling, self.grid_step_deg)
    }
}
