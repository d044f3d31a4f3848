//! Monte-Carlo scenario runner.
//!
//! Every trial draws its trajectory, signal value and noise from a ChaCha
//! stream keyed by `(seed, trial)`, so results do not depend on how trials are
//! scheduled. All estimators in a trial see the same snapshots and share the
//! zero-mean RVM estimate of the first snapshot.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::array_model::{realify_matrix, stack, synthesize_snapshot, SteeringGrid, C64};
use crate::bcskf::{MotionModel, PriorMean, Tracker};
use crate::doa::{primary_doa, threshold, DoaEstimate, ThresholdConfig};
use crate::error::{Error, Result};
use crate::gibbs::{run_chain, GibbsConfig};
use crate::harness::metrics::rmse_single;
use crate::harness::scenario::{EstimatorKind, EstimatorSpec, ScenarioSpec};
use crate::rvm::{run_modified_rvm, RvmConfig, RvmResult};

/// Estimator tuning shared by every scenario in a run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorSettings {
    pub rvm: RvmConfig,
    pub gibbs: GibbsConfig,
    pub threshold: ThresholdConfig,
    /// Carry only the thresholded support in the tracker state between
    /// snapshots. Off by default: the filter normally carries the full
    /// updated vector.
    pub sparse_state: bool,
}

/// Sequential estimator over the snapshots of one trajectory.
#[allow(clippy::large_enum_variant)]
pub enum SequenceEstimator {
    Bcskf(Tracker),
    Gibbs {
        config: GibbsConfig,
        previous: Option<DVector<C64>>,
        rng: ChaCha8Rng,
    },
}

impl SequenceEstimator {
    pub fn new(
        kind: EstimatorKind,
        motion: MotionModel,
        settings: &EstimatorSettings,
        sigma2_init: f64,
        rng: ChaCha8Rng,
    ) -> Self {
        match kind {
            EstimatorKind::Rvm | EstimatorKind::Mrvm => {
                let prior = if kind == EstimatorKind::Rvm {
                    PriorMean::Zero
                } else {
                    PriorMean::Predicted
                };
                let tracker = Tracker::new(prior, motion, settings.rvm.clone(), sigma2_init);
                Self::Bcskf(if settings.sparse_state {
                    tracker.with_sparsify(settings.threshold)
                } else {
                    tracker
                })
            }
            EstimatorKind::Gibbs => Self::Gibbs {
                config: GibbsConfig {
                    sigma2_init,
                    ..settings.gibbs.clone()
                },
                previous: None,
                rng,
            },
        }
    }

    /// Seeds the estimator with the zero-mean RVM fit of the first snapshot
    /// and its thresholded DOA estimate.
    pub fn seed(&mut self, first: &RvmResult, first_est: &DoaEstimate) {
        match self {
            Self::Bcskf(t) => t.initialize_from(first),
            Self::Gibbs { previous, .. } => *previous = Some(first_est.to_sparse(first.x_complex.len())),
        }
    }

    /// Estimated complex signal for the next stacked measurement.
    pub fn step(
        &mut self,
        a: &DMatrix<f64>,
        y: &DVector<f64>,
        thetas: &[f64],
        threshold_cfg: ThresholdConfig,
    ) -> Result<DoaEstimate> {
        match self {
            Self::Bcskf(t) => {
                let out = t.step(a, y)?;
                threshold(&out.x_complex, thetas, threshold_cfg)
            }
            Self::Gibbs {
                config,
                previous,
                rng,
            } => {
                let prev = match previous.take() {
                    Some(p) => p,
                    None => {
                        // no seed: start from a zero-mean RVM fit of this snapshot
                        let first = run_modified_rvm(
                            a,
                            y,
                            &DVector::zeros(a.ncols()),
                            &RvmConfig::default(),
                            config.sigma2_init,
                        )?;
                        let est = threshold(&first.x_complex, thetas, threshold_cfg)?;
                        *previous = Some(est.to_sparse(thetas.len()));
                        return Ok(est);
                    }
                };
                let summary = run_chain(a, y, &prev, config, rng)?;
                let est = threshold(&summary.x_complex(), thetas, threshold_cfg)?;
                *previous = Some(est.to_sparse(thetas.len()));
                Ok(est)
            }
        }
    }
}

/// Per-estimator outcome of one trial.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorTrace {
    pub estimates: Vec<Option<f64>>,
    pub runtimes: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct TrialOutcome {
    pub trial: usize,
    pub truth: Vec<f64>,
    /// Indexed like the scenario's estimator list; `Err` holds the failure.
    pub traces: Vec<std::result::Result<EstimatorTrace, String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scenario: String,
    pub estimator: String,
    /// 1-based snapshot index.
    pub k: usize,
    pub rmse_deg: f64,
    pub runtime_s: f64,
    pub trials: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scenario: String,
    pub estimator: String,
    pub average_rmse_deg: f64,
    pub max_rmse_deg: f64,
    pub average_runtime_s: f64,
    pub trials: usize,
    pub failed_trials: usize,
}

#[derive(Clone, Debug)]
pub struct ScenarioReport {
    pub spec: ScenarioSpec,
    pub labels: Vec<String>,
    pub rows: Vec<ResultRow>,
    pub summary: Vec<SummaryRow>,
    pub trials: Vec<TrialOutcome>,
}

impl ScenarioReport {
    pub fn summary_for(&self, label: &str) -> Option<&SummaryRow> {
        self.summary.iter().find(|s| s.estimator == label)
    }

    /// Per-snapshot RMSE curve for one estimator.
    pub fn curve(&self, label: &str) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.estimator == label)
            .map(|r| r.rmse_deg)
            .collect()
    }
}

const STREAM_SCENARIO: u64 = 0;

/// Estimator random streams are keyed by kind so that filtering the
/// estimator list does not change any estimator's draws.
fn estimator_stream(kind: EstimatorKind) -> u64 {
    match kind {
        EstimatorKind::Rvm => 1,
        EstimatorKind::Mrvm => 2,
        EstimatorKind::Gibbs => 3,
    }
}

/// Deterministic RNG for `(seed, trial, purpose)`.
pub fn trial_rng(seed: u64, trial: usize, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ purpose.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(trial as u64);
    rng
}

/// True trajectory and complex measurements of one trial.
#[derive(Clone, Debug)]
pub struct TrialData {
    pub truth: Vec<f64>,
    pub value: f64,
    pub snapshots: Vec<DVector<C64>>,
}

/// Draws the trajectory, signal value and noisy snapshots of trial `trial`.
pub fn simulate_trial(spec: &ScenarioSpec, grid: &SteeringGrid, trial: usize) -> Result<TrialData> {
    let mut rng = trial_rng(spec.seed, trial, STREAM_SCENARIO);
    let truth = spec.trajectory(&mut rng);
    let value = spec.signal(&mut rng);
    let mut snapshots = Vec::with_capacity(truth.len());
    for &theta in &truth {
        let mut x = DVector::zeros(grid.len());
        let idx = grid
            .index_of(theta)
            .ok_or_else(|| Error::Domain(format!("true DOA {theta}° is not on the grid")))?;
        x[idx] = C64::new(value, 0.0);
        snapshots.push(synthesize_snapshot(grid, &x, spec.sigma2_true, &mut rng)?.y);
    }
    Ok(TrialData {
        truth,
        value,
        snapshots,
    })
}

/// Runs one trial of a scenario.
pub fn run_trial(
    spec: &ScenarioSpec,
    grid: &SteeringGrid,
    a: &DMatrix<f64>,
    settings: &EstimatorSettings,
    trial: usize,
) -> Result<TrialOutcome> {
    let data = simulate_trial(spec, grid, trial)?;
    let truth = data.truth;
    let measurements: Vec<DVector<f64>> = data.snapshots.iter().map(stack).collect();

    let thetas = grid.thetas();
    let started = Instant::now();
    let first = run_modified_rvm(
        a,
        &measurements[0],
        &DVector::zeros(a.ncols()),
        &settings.rvm,
        spec.sigma2_init,
    );
    let first_time = started.elapsed().as_secs_f64();
    let first = first.and_then(|f| {
        let est = threshold(&f.x_complex, thetas, settings.threshold)?;
        Ok((f, est))
    });

    let traces = spec
        .estimators
        .iter()
        .map(|est_spec| {
            let (first, first_est) = first.as_ref().map_err(|e| e.to_string())?;
            run_estimator(
                spec,
                est_spec,
                trial,
                a,
                thetas,
                settings,
                &measurements,
                first,
                first_est,
                first_time,
            )
            .map_err(|e| e.to_string())
        })
        .collect();

    Ok(TrialOutcome { trial, truth, traces })
}

#[allow(clippy::too_many_arguments)]
fn run_estimator(
    spec: &ScenarioSpec,
    est_spec: &EstimatorSpec,
    trial: usize,
    a: &DMatrix<f64>,
    thetas: &[f64],
    settings: &EstimatorSettings,
    measurements: &[DVector<f64>],
    first: &RvmResult,
    first_est: &DoaEstimate,
    first_time: f64,
) -> Result<EstimatorTrace> {
    let motion = MotionModel::from_degrees(spec.assumed_delta(est_spec) as f64, spec.array.grid_step_deg)?;
    let rng = trial_rng(spec.seed, trial, estimator_stream(est_spec.kind));
    let mut estimator = SequenceEstimator::new(est_spec.kind, motion, settings, spec.sigma2_init, rng);
    estimator.seed(first, first_est);
    let mut estimates = vec![primary_doa(first_est)];
    let mut runtimes = vec![first_time];
    for y in &measurements[1..] {
        let started = Instant::now();
        let est = estimator.step(a, y, thetas, settings.threshold)?;
        runtimes.push(started.elapsed().as_secs_f64());
        estimates.push(primary_doa(&est));
    }
    Ok(EstimatorTrace { estimates, runtimes })
}

/// Runs every trial of a scenario and scores it.
pub fn run_scenario(spec: &ScenarioSpec, settings: &EstimatorSettings) -> Result<ScenarioReport> {
    spec.validate()?;
    settings.rvm.validate()?;
    settings.gibbs.validate()?;
    ThresholdConfig::new(settings.threshold.eta)?;
    let grid = spec.array.build()?;
    let a = realify_matrix(grid.effective());

    let trials: Vec<TrialOutcome> = (0..spec.trials)
        .into_par_iter()
        .map(|q| run_trial(spec, &grid, &a, settings, q))
        .collect::<Result<_>>()?;

    let labels: Vec<String> = spec.estimators.iter().map(EstimatorSpec::label).collect();
    let (rows, summary) = score(spec, &labels, &trials)?;
    Ok(ScenarioReport {
        spec: spec.clone(),
        labels,
        rows,
        summary,
        trials,
    })
}

/// Per-snapshot RMSE rows and per-estimator summaries from trial outcomes.
pub fn score(
    spec: &ScenarioSpec,
    labels: &[String],
    trials: &[TrialOutcome],
) -> Result<(Vec<ResultRow>, Vec<SummaryRow>)> {
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for (e, label) in labels.iter().enumerate() {
        let ok: Vec<(&TrialOutcome, &EstimatorTrace)> = trials
            .iter()
            .filter_map(|t| t.traces[e].as_ref().ok().map(|tr| (t, tr)))
            .collect();
        let failed = trials.len() - ok.len();
        let mut curve = Vec::with_capacity(spec.snapshots);
        let mut times = Vec::with_capacity(spec.snapshots);
        for k in 0..spec.snapshots {
            let truth: Vec<f64> = ok.iter().map(|(t, _)| t.truth[k]).collect();
            let est: Vec<Option<f64>> = ok.iter().map(|(_, tr)| tr.estimates[k]).collect();
            let rmse = rmse_single(&truth, &est)?;
            let runtime = if ok.is_empty() {
                0.0
            } else {
                ok.iter().map(|(_, tr)| tr.runtimes[k]).sum::<f64>() / ok.len() as f64
            };
            rows.push(ResultRow {
                scenario: spec.name.clone(),
                estimator: label.clone(),
                k: k + 1,
                rmse_deg: rmse,
                runtime_s: runtime,
                trials: ok.len(),
            });
            curve.push(rmse);
            times.push(runtime);
        }
        let n = curve.len().max(1) as f64;
        summary.push(SummaryRow {
            scenario: spec.name.clone(),
            estimator: label.clone(),
            average_rmse_deg: curve.iter().sum::<f64>() / n,
            max_rmse_deg: curve.iter().copied().fold(0.0, f64::max),
            average_runtime_s: times.iter().sum::<f64>() / n,
            trials: ok.len(),
            failed_trials: failed,
        });
    }
    Ok((rows, summary))
}

/// Relative improvement of `candidate` over `baseline`, in percent.
pub fn improvement_pct(baseline: f64, candidate: f64) -> f64 {
    100.0 * (baseline - candidate) / baseline
}

/// Estimates a DOA sequence from complex snapshots with one estimator.
///
/// The first snapshot always uses the zero-mean RVM; `seed` only matters for
/// the Gibbs sampler.
pub fn estimate_sequence(
    grid: &SteeringGrid,
    kind: EstimatorKind,
    motion: MotionModel,
    settings: &EstimatorSettings,
    sigma2_init: f64,
    seed: u64,
    snapshots: &[DVector<C64>],
) -> Result<Vec<DoaEstimate>> {
    let Some((first_y, rest)) = snapshots.split_first() else {
        return Ok(Vec::new());
    };
    for y in snapshots {
        if y.len() != grid.antennas() {
            return Err(Error::Dimension(format!(
                "snapshot has {} entries, array has {} antennas",
                y.len(),
                grid.antennas()
            )));
        }
    }
    let a = realify_matrix(grid.effective());
    let thetas = grid.thetas();
    let first = run_modified_rvm(
        &a,
        &stack(first_y),
        &DVector::zeros(a.ncols()),
        &settings.rvm,
        sigma2_init,
    )?;
    let first_est = threshold(&first.x_complex, thetas, settings.threshold)?;
    let mut estimator = SequenceEstimator::new(
        kind,
        motion,
        settings,
        sigma2_init,
        trial_rng(seed, 0, estimator_stream(kind)),
    );
    estimator.seed(&first, &first_est);
    let mut out = vec![first_est];
    for y in rest {
        out.push(estimator.step(&a, &stack(y), thetas, settings.threshold)?);
    }
    Ok(out)
}
