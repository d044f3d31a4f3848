//! Bayesian compressive-sensing Kalman filter.
//!
//! Each snapshot shifts the previous filtered signal by the assumed DOA
//! change, fits the process precisions and noise variance to the innovation
//! with the (modified) RVM, and then applies a standard Kalman update with
//! process covariance `Σ_{k−1} + P_k⁻¹`.

use nalgebra::{DMatrix, DVector};

use crate::array_model::{stack, unstack, C64};
use crate::doa::{sparsify, ThresholdConfig};
use crate::error::{Error, Result};
use crate::linalg::{cholesky_jittered, symmetrize};
use crate::rvm::{run_modified_rvm, RvmConfig, RvmResult};

/// Assumed per-snapshot DOA change, as a signed number of grid steps.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MotionModel {
    pub delta_steps: isize,
}

impl MotionModel {
    pub fn new(delta_steps: isize) -> Self {
        Self { delta_steps }
    }

    /// Converts a change in degrees; the grid step must divide it.
    pub fn from_degrees(delta_deg: f64, grid_step_deg: f64) -> Result<Self> {
        let steps = delta_deg / grid_step_deg;
        if (steps - steps.round()).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "DOA change {delta_deg}° is not a multiple of the {grid_step_deg}° grid"
            )));
        }
        if steps.abs() >= 180.0 / grid_step_deg {
            return Err(Error::Config(format!(
                "DOA change {delta_deg}° spans the whole angular range"
            )));
        }
        Ok(Self::new(steps.round() as isize))
    }
}

/// Filtered state carried between snapshots.
#[derive(Clone, Debug)]
pub struct TrackState {
    pub x_filt: DVector<f64>,
    pub sigma_filt: DMatrix<f64>,
    pub sigma2: f64,
    pub p: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct Prediction {
    pub x_pred: DVector<f64>,
    pub sigma_pred: DMatrix<f64>,
    pub y_pred: DVector<f64>,
    pub innovation: DVector<f64>,
}

#[derive(Clone, Debug)]
pub struct UpdateResult {
    pub x_new: DVector<f64>,
    pub sigma_new: DMatrix<f64>,
    pub gain: DMatrix<f64>,
    pub innovation: DVector<f64>,
}

/// Moves the real block and the imaginary block of a stacked vector by
/// `motion.delta_steps` positions. Entries pushed past either end are dropped.
pub fn shift_prediction(x_filt: &DVector<f64>, motion: MotionModel) -> DVector<f64> {
    let n = x_filt.len() / 2;
    let d = motion.delta_steps;
    let mut out = DVector::zeros(x_filt.len());
    for i in 0..n {
        let j = i as isize + d;
        if j < 0 || j >= n as isize {
            continue;
        }
        let j = j as usize;
        out[j] = x_filt[i];
        out[n + j] = x_filt[n + i];
    }
    out
}

/// Prior variances `1/p`, with pruned components limited to `1/prune_cap`.
fn process_variances(p: &[f64], prune_cap: f64) -> impl Iterator<Item = f64> + '_ {
    p.iter().map(move |&v| 1.0 / v.min(prune_cap))
}

/// Prediction step for measurement `y`, given the current precisions.
pub fn predict(
    state: &TrackState,
    motion: MotionModel,
    p: &[f64],
    prune_cap: f64,
    a: &DMatrix<f64>,
    y: &DVector<f64>,
) -> Result<Prediction> {
    let n = state.x_filt.len();
    if p.len() != n || a.ncols() != n || a.nrows() != y.len() || state.sigma_filt.nrows() != n {
        return Err(Error::Dimension(format!(
            "state {n}, precisions {}, design {}x{}, measurement {}",
            p.len(),
            a.nrows(),
            a.ncols(),
            y.len()
        )));
    }
    let x_pred = shift_prediction(&state.x_filt, motion);
    let mut sigma_pred = state.sigma_filt.clone();
    for (i, v) in process_variances(p, prune_cap).enumerate() {
        sigma_pred[(i, i)] += v;
    }
    let y_pred = a * &x_pred;
    let innovation = y - &y_pred;
    Ok(Prediction {
        x_pred,
        sigma_pred,
        y_pred,
        innovation,
    })
}

/// Kalman measurement update.
pub fn kalman_update(
    x_pred: &DVector<f64>,
    sigma_pred: &DMatrix<f64>,
    innovation: &DVector<f64>,
    a: &DMatrix<f64>,
    sigma2: f64,
) -> Result<UpdateResult> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::Domain(format!(
            "noise variance must be positive, got {sigma2}"
        )));
    }
    let a_sigma = a * sigma_pred;
    let mut s = &a_sigma * a.transpose();
    for i in 0..s.nrows() {
        s[(i, i)] += sigma2;
    }
    symmetrize(&mut s);
    let chol = cholesky_jittered(&s, "innovation covariance")?;
    // Kᵀ = S⁻¹ Ã Σ_pred
    let gain_t = chol.solve(&a_sigma);
    let gain = gain_t.transpose();
    let x_new = x_pred + &gain * innovation;
    let mut sigma_new = sigma_pred - &gain * &a_sigma;
    symmetrize(&mut sigma_new);
    Ok(UpdateResult {
        x_new,
        sigma_new,
        gain,
        innovation: innovation.clone(),
    })
}

/// How the per-snapshot RVM pass sets its prior mean.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PriorMean {
    /// Sparse prior centred on zero.
    Zero,
    /// Prior centred on the Kalman prediction.
    Predicted,
}

#[derive(Clone, Debug)]
pub struct StepOutput {
    pub x: DVector<f64>,
    pub x_complex: DVector<C64>,
    pub rvm: RvmResult,
}

/// One sequential tracker.
#[derive(Clone, Debug)]
pub struct Tracker {
    pub prior: PriorMean,
    pub motion: MotionModel,
    pub rvm: RvmConfig,
    pub sigma2_init: f64,
    /// When set, the filtered signal is thresholded after every update so
    /// that only the retained entries are carried to the next prediction.
    pub sparsify: Option<ThresholdConfig>,
    state: Option<TrackState>,
}

impl Tracker {
    pub fn new(prior: PriorMean, motion: MotionModel, rvm: RvmConfig, sigma2_init: f64) -> Self {
        Self {
            prior,
            motion,
            rvm,
            sigma2_init,
            sparsify: None,
            state: None,
        }
    }

    pub fn with_sparsify(mut self, config: ThresholdConfig) -> Self {
        self.sparsify = Some(config);
        self
    }

    fn carried(&self, x: &DVector<f64>) -> DVector<f64> {
        match self.sparsify {
            Some(cfg) => stack(&sparsify(&unstack(x), cfg)),
            None => x.clone(),
        }
    }

    pub fn state(&self) -> Option<&TrackState> {
        self.state.as_ref()
    }

    /// Seeds the filter from a zero-mean RVM fit of the first snapshot:
    /// `x̃₀ = x_opt`, `Σ₀ = P₀⁻¹`.
    pub fn initialize_from(&mut self, first: &RvmResult) {
        let n = first.x_opt.len();
        let diag = DVector::from_iterator(n, process_variances(&first.p_opt, self.rvm.prune_cap));
        self.state = Some(TrackState {
            x_filt: self.carried(&first.x_opt),
            sigma_filt: DMatrix::from_diagonal(&diag),
            sigma2: first.sigma2_opt,
            p: first.p_opt.clone(),
        });
    }

    /// Processes one stacked measurement.
    pub fn step(&mut self, a: &DMatrix<f64>, y: &DVector<f64>) -> Result<StepOutput> {
        let Some(state) = self.state.as_ref() else {
            let first = run_modified_rvm(a, y, &DVector::zeros(a.ncols()), &self.rvm, self.sigma2_init)?;
            self.initialize_from(&first);
            return Ok(StepOutput {
                x: first.x_opt.clone(),
                x_complex: first.x_complex.clone(),
                rvm: first,
            });
        };
        let (mut next, rvm) = track_step(state, a, y, self.motion, self.prior, &self.rvm, self.sigma2_init)?;
        let out = StepOutput {
            x: next.x_filt.clone(),
            x_complex: unstack(&next.x_filt),
            rvm,
        };
        next.x_filt = self.carried(&next.x_filt);
        self.state = Some(next);
        Ok(out)
    }
}

/// Full filter recursion for one snapshot.
pub fn track_step(
    state: &TrackState,
    a: &DMatrix<f64>,
    y: &DVector<f64>,
    motion: MotionModel,
    prior: PriorMean,
    config: &RvmConfig,
    sigma2_init: f64,
) -> Result<(TrackState, RvmResult)> {
    let x_pred = shift_prediction(&state.x_filt, motion);
    let innovation = y - a * &x_pred;
    let x_p = match prior {
        PriorMean::Zero => DVector::zeros(x_pred.len()),
        PriorMean::Predicted => x_pred,
    };
    let rvm = run_modified_rvm(a, &innovation, &x_p, config, sigma2_init)?;
    let pred = predict(state, motion, &rvm.p_opt, config.prune_cap, a, y)?;
    let upd = kalman_update(
        &pred.x_pred,
        &pred.sigma_pred,
        &pred.innovation,
        a,
        rvm.sigma2_opt,
    )?;
    Ok((
        TrackState {
            x_filt: upd.x_new,
            sigma_filt: upd.sigma_new,
            sigma2: rvm.sigma2_opt,
            p: rvm.p_opt.clone(),
        },
        rvm,
    ))
}
