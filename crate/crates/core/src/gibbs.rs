//! Spike-and-slab Gibbs sampler for a single snapshot.
//!
//! Each stacked component has prior `(1 − z̃ₙ) δ₀ + z̃ₙ N(0, pₙ⁻¹)`, with
//! one indicator and one precision shared by the real and imaginary part of
//! a grid angle. Grid angles further than `window` steps from every nonzero
//! entry of the previous snapshot's estimate draw their indicator from a
//! Beta prior that favours the spike.
//!
//! One sweep:
//! 1. for every stacked index, draw `x̃ₙ` from its spike/slab conditional;
//! 2. draw `pₙ ~ Gamma(β₁ + ‖x_{k−1,nj}‖₀, β₂ + ‖x_{k−1,nj}‖₂²)` per grid angle;
//! 3. draw `z¹ₙ ~ Beta(β₅, β₆)`;
//! 4. draw `z²ₙ ~ Beta(β₅ − 1/j, β₆ + 1/j)`;
//! 5. draw `p₀ ~ Gamma(β₃ + M, β₄ + ½‖ỹ − Ãx̃‖²)`.
//!
//! Gaussians use precision parameterisation, Gammas shape/rate.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, Normal};
use serde::{Deserialize, Serialize};

use crate::array_model::{stack, C64};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GibbsConfig {
    /// Total sweeps `T`.
    pub iterations: usize,
    /// Discarded sweeps `T_BI`.
    pub burn_in: usize,
    /// Indicator window half-width `j`, in grid steps.
    pub window: usize,
    /// `β₁..β₆`.
    pub beta: [f64; 6],
    /// Noise variance used to initialise `p₀`.
    pub sigma2_init: f64,
    /// Indicator probabilities are clipped to `[clip, 1 − clip]` before the
    /// odds are formed.
    pub z_clip: f64,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        Self {
            iterations: 300,
            burn_in: 250,
            window: 5,
            beta: [1e-4, 1e-4, 1e-4, 1e-4, 1.0, 1.0],
            sigma2_init: 0.1,
            z_clip: 1e-12,
        }
    }
}

impl GibbsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.iterations {
            return Err(Error::Config(format!(
                "burn-in {} must be below the iteration count {}",
                self.burn_in, self.iterations
            )));
        }
        if self.window == 0 {
            return Err(Error::Config("indicator window must be at least 1".into()));
        }
        if self.beta.iter().any(|b| !(*b > 0.0)) {
            return Err(Error::Config("Gamma/Beta hyperpriors must be positive".into()));
        }
        if !(self.beta[4] - 1.0 / self.window as f64 > 0.0) {
            return Err(Error::Config(format!(
                "beta5 - 1/j = {} must be positive",
                self.beta[4] - 1.0 / self.window as f64
            )));
        }
        if !(self.sigma2_init > 0.0) {
            return Err(Error::Config("initial noise variance must be positive".into()));
        }
        Ok(())
    }
}

/// Sampler state for the current snapshot.
#[derive(Clone, Debug)]
pub struct GibbsState {
    pub x: DVector<f64>,
    /// Precisions, length `2N`; entries `n` and `N + n` are equal.
    pub p: Vec<f64>,
    pub z1: Vec<f64>,
    pub z2: Vec<f64>,
    /// Noise precision `1/σ²`.
    pub p0: f64,
    /// Per grid angle: does it lie within the window of the previous support?
    pub in_window: Vec<bool>,
    resid: DVector<f64>,
}

impl GibbsState {
    fn grid_len(&self) -> usize {
        self.z1.len()
    }

    /// Indicator prior probability for stacked index `n`.
    pub fn indicator(&self, n: usize) -> f64 {
        let g = n % self.grid_len();
        if self.in_window[g] {
            self.z1[g]
        } else {
            self.z2[g]
        }
    }

    /// Current residual `ỹ − Ãx̃`.
    pub fn residual(&self) -> &DVector<f64> {
        &self.resid
    }
}

/// Conditional of one component given all others.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Conditional {
    pub p_hat: f64,
    pub mu_hat: f64,
    pub z_hat: f64,
}

/// For each grid angle, whether it lies within `window` steps of a previous
/// nonzero estimate. An empty support leaves every angle inside.
pub fn window_mask(x_prev: &DVector<C64>, window: usize) -> Vec<bool> {
    let n = x_prev.len();
    let support: Vec<usize> = (0..n).filter(|&i| x_prev[i] != C64::new(0.0, 0.0)).collect();
    if support.is_empty() {
        return vec![true; n];
    }
    (0..n)
        .map(|i| support.iter().any(|&s| s.abs_diff(i) <= window))
        .collect()
}

/// Shape and rate of the precision posterior for grid angle `g`.
pub fn precision_posterior(g: usize, x_prev: &DVector<C64>, config: &GibbsConfig) -> (f64, f64) {
    let lo = g.saturating_sub(config.window);
    let hi = (g + config.window).min(x_prev.len() - 1);
    let mut count = 0usize;
    let mut energy = 0.0;
    for v in x_prev.rows_range(lo..=hi).iter() {
        if *v != C64::new(0.0, 0.0) {
            count += 1;
            energy += v.norm_sqr();
        }
    }
    (config.beta[0] + count as f64, config.beta[1] + energy)
}

fn gamma(shape: f64, rate: f64) -> Gamma<f64> {
    Gamma::new(shape, 1.0 / rate).expect("positive gamma parameters")
}

/// Draws `pₙ` for a stacked index.
pub fn sample_precision<R: Rng + ?Sized>(
    n: usize,
    x_prev: &DVector<C64>,
    config: &GibbsConfig,
    rng: &mut R,
) -> f64 {
    let (shape, rate) = precision_posterior(n % x_prev.len(), x_prev, config);
    gamma(shape, rate).sample(rng)
}

/// Draws `(z¹, z²)` for `n` grid angles.
pub fn sample_indicators<R: Rng + ?Sized>(
    n: usize,
    config: &GibbsConfig,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (first, second) = indicator_priors(config)?;
    let z1 = (0..n).map(|_| first.sample(rng)).collect();
    let z2 = (0..n).map(|_| second.sample(rng)).collect();
    Ok((z1, z2))
}

fn indicator_priors(config: &GibbsConfig) -> Result<(Beta<f64>, Beta<f64>)> {
    let inv_j = 1.0 / config.window as f64;
    let (b5, b6) = (config.beta[4], config.beta[5]);
    if !(b5 - inv_j > 0.0) {
        return Err(Error::Config(format!(
            "beta5 - 1/j = {} must be positive",
            b5 - inv_j
        )));
    }
    let first = Beta::new(b5, b6).map_err(|e| Error::Config(e.to_string()))?;
    let second = Beta::new(b5 - inv_j, b6 + inv_j).map_err(|e| Error::Config(e.to_string()))?;
    Ok((first, second))
}

/// Draws the noise precision from its Gamma conditional.
pub fn sample_noise_precision<R: Rng + ?Sized>(state: &GibbsState, config: &GibbsConfig, rng: &mut R) -> f64 {
    let m = state.resid.len() as f64 / 2.0;
    gamma(
        config.beta[2] + m,
        config.beta[3] + 0.5 * state.resid.norm_squared(),
    )
    .sample(rng)
}

/// Spike/slab conditional of component `n`.
pub fn conditional_signal_params(
    n: usize,
    state: &GibbsState,
    a: &DMatrix<f64>,
    col_norm2: f64,
    config: &GibbsConfig,
) -> Conditional {
    let col = a.column(n);
    // Ãₙᵀ(ỹ − Ã₋ₙx̃₋ₙ) = Ãₙᵀ r + ‖Ãₙ‖² x̃ₙ
    let proj = col.dot(&state.resid) + col_norm2 * state.x[n];
    let p = state.p[n];
    let p_hat = p + state.p0 * col_norm2;
    let mu_hat = state.p0 * proj / p_hat;
    let z = state.indicator(n);
    let z_hat = if z == 0.0 || z == 1.0 {
        z
    } else {
        let z = z.clamp(config.z_clip, 1.0 - config.z_clip);
        let log_odds = (z / (1.0 - z)).ln() + 0.5 * (p.ln() - p_hat.ln()) + 0.5 * p_hat * mu_hat * mu_hat;
        logistic(log_odds)
    };
    Conditional { p_hat, mu_hat, z_hat }
}

fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Draws component `n` from its conditional and keeps the residual in sync.
pub fn sample_signal<R: Rng + ?Sized>(
    n: usize,
    state: &mut GibbsState,
    a: &DMatrix<f64>,
    col_norm2: f64,
    config: &GibbsConfig,
    rng: &mut R,
) -> f64 {
    let c = conditional_signal_params(n, state, a, col_norm2, config);
    let u: f64 = rng.random();
    let value = if u < c.z_hat {
        Normal::new(c.mu_hat, c.p_hat.sqrt().recip())
            .expect("finite slab")
            .sample(rng)
    } else {
        0.0
    };
    let old = state.x[n];
    if value != old {
        state.resid.axpy(old - value, &a.column(n), 1.0);
        state.x[n] = value;
    }
    value
}

#[derive(Clone, Debug)]
pub struct ChainSummary {
    /// Mean of `x̃` over the retained sweeps.
    pub x_mean: DVector<f64>,
    /// Fraction of retained sweeps in which each stacked entry was nonzero.
    pub occupancy: Vec<f64>,
    /// Mean of `1/p₀` over the retained sweeps.
    pub sigma2_mean: f64,
    pub retained: usize,
}

impl ChainSummary {
    pub fn x_complex(&self) -> DVector<C64> {
        crate::array_model::unstack(&self.x_mean)
    }
}

/// Initial state: previous estimate as the starting signal, precisions and
/// indicators from their conditionals, `p₀ = 1/σ²_init`.
pub fn init_state<R: Rng + ?Sized>(
    a: &DMatrix<f64>,
    y: &DVector<f64>,
    x_prev: &DVector<C64>,
    config: &GibbsConfig,
    rng: &mut R,
) -> Result<GibbsState> {
    config.validate()?;
    let n = x_prev.len();
    if a.ncols() != 2 * n || a.nrows() != y.len() {
        return Err(Error::Dimension(format!(
            "design {}x{}, measurement {}, previous estimate {n}",
            a.nrows(),
            a.ncols(),
            y.len()
        )));
    }
    let x = stack(x_prev);
    let resid = y - a * &x;
    let mut p = vec![0.0; 2 * n];
    for g in 0..n {
        let v = sample_precision(g, x_prev, config, rng);
        p[g] = v;
        p[n + g] = v;
    }
    let (z1, z2) = sample_indicators(n, config, rng)?;
    Ok(GibbsState {
        x,
        p,
        z1,
        z2,
        p0: 1.0 / config.sigma2_init,
        in_window: window_mask(x_prev, config.window),
        resid,
    })
}

/// Per-snapshot quantities that stay fixed across sweeps.
pub struct Sweeper<'a> {
    a: &'a DMatrix<f64>,
    config: &'a GibbsConfig,
    col_norm2: Vec<f64>,
    precision: Vec<Gamma<f64>>,
    z_first: Beta<f64>,
    z_second: Beta<f64>,
}

impl<'a> Sweeper<'a> {
    pub fn new(a: &'a DMatrix<f64>, x_prev: &DVector<C64>, config: &'a GibbsConfig) -> Result<Self> {
        let (z_first, z_second) = indicator_priors(config)?;
        Ok(Self {
            a,
            config,
            col_norm2: a.column_iter().map(|c| c.norm_squared()).collect(),
            precision: (0..x_prev.len())
                .map(|g| {
                    let (shape, rate) = precision_posterior(g, x_prev, config);
                    gamma(shape, rate)
                })
                .collect(),
            z_first,
            z_second,
        })
    }

    /// One full systematic sweep (steps 1 to 5).
    pub fn sweep<R: Rng + ?Sized>(&self, state: &mut GibbsState, rng: &mut R) {
        let n = self.precision.len();
        for idx in 0..2 * n {
            sample_signal(idx, state, self.a, self.col_norm2[idx], self.config, rng);
        }
        for (g, dist) in self.precision.iter().enumerate() {
            let v = dist.sample(rng);
            state.p[g] = v;
            state.p[n + g] = v;
        }
        for g in 0..n {
            state.z1[g] = self.z_first.sample(rng);
            state.z2[g] = self.z_second.sample(rng);
        }
        state.p0 = sample_noise_precision(state, self.config, rng);
    }
}

/// Runs `T` sweeps and averages the last `T − T_BI`.
pub fn run_chain<R: Rng + ?Sized>(
    a: &DMatrix<f64>,
    y: &DVector<f64>,
    x_prev: &DVector<C64>,
    config: &GibbsConfig,
    rng: &mut R,
) -> Result<ChainSummary> {
    let mut state = init_state(a, y, x_prev, config, rng)?;
    let sweeper = Sweeper::new(a, x_prev, config)?;
    let len = a.ncols();

    let mut sum = DVector::zeros(len);
    let mut occupied = vec![0usize; len];
    let mut sigma2_sum = 0.0;
    let mut retained = 0usize;

    for sweep in 0..config.iterations {
        sweeper.sweep(&mut state, rng);
        if sweep >= config.burn_in {
            sum += &state.x;
            for (o, v) in occupied.iter_mut().zip(state.x.iter()) {
                if *v != 0.0 {
                    *o += 1;
                }
            }
            sigma2_sum += 1.0 / state.p0;
            retained += 1;
        }
    }

    let r = retained as f64;
    Ok(ChainSummary {
        x_mean: sum / r,
        occupancy: occupied.into_iter().map(|c| c as f64 / r).collect(),
        sigma2_mean: sigma2_sum / r,
        retained,
    })
}
