//! Monte-Carlo scenario definitions.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::array_model::ArrayConfig;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    /// BCSKF whose precisions come from a zero-mean RVM.
    Rvm,
    /// BCSKF whose precisions come from the RVM centred on the prediction.
    Mrvm,
    /// Spike-and-slab Gibbs sampler.
    Gibbs,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Rvm => "rvm",
            EstimatorKind::Mrvm => "mrvm",
            EstimatorKind::Gibbs => "gibbs",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "rvm" => Ok(Self::Rvm),
            "mrvm" => Ok(Self::Mrvm),
            "gibbs" => Ok(Self::Gibbs),
            other => Err(Error::Config(format!("unknown estimator '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSpec {
    pub kind: EstimatorKind,
    /// Replaces the scenario's assumed DOA change for this estimator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assumed_delta_deg: Option<i32>,
}

impl EstimatorSpec {
    pub fn plain(kind: EstimatorKind) -> Self {
        Self {
            kind,
            assumed_delta_deg: None,
        }
    }

    pub fn label(&self) -> String {
        match self.assumed_delta_deg {
            Some(d) => format!("{}[{d:+}]", self.kind.name()),
            None => self.kind.name().to_string(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialDoa {
    Fixed(f64),
    /// Uniform over grid angles that keep the whole trajectory in range.
    Uniform,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrueMotion {
    /// Constant change per snapshot, in degrees.
    Constant(i32),
    /// `up` snapshots of `+step`, then `-step` for the rest.
    UpThenDown { up: usize, step: i32 },
    /// Uniform integer change in `[-max, max]` per snapshot.
    RandomSteps { max: i32 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalValue {
    Fixed(f64),
    /// `±1` with equal probability, drawn once per trial.
    RandomSign,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub array: ArrayConfig,
    pub initial_doa: InitialDoa,
    pub motion: TrueMotion,
    pub signal_value: SignalValue,
    pub snapshots: usize,
    pub trials: usize,
    /// Assumed DOA change used by the Kalman prediction.
    pub assumed_delta_deg: i32,
    pub estimators: Vec<EstimatorSpec>,
    pub sigma2_true: f64,
    pub sigma2_init: f64,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        if self.snapshots == 0 || self.trials == 0 {
            return Err(Error::Config(format!(
                "scenario '{}' needs at least one snapshot and one trial",
                self.name
            )));
        }
        if !(self.sigma2_true >= 0.0) || !(self.sigma2_init > 0.0) {
            return Err(Error::Config(format!(
                "scenario '{}' has invalid noise settings",
                self.name
            )));
        }
        if let InitialDoa::Fixed(t) = self.initial_doa {
            if !(0.0..=180.0).contains(&t) {
                return Err(Error::Config(format!("initial DOA {t}° out of range")));
            }
        }
        if self.estimators.is_empty() {
            return Err(Error::Config(format!(
                "scenario '{}' has no estimators",
                self.name
            )));
        }
        Ok(())
    }

    /// Assumed change for one estimator, in degrees.
    pub fn assumed_delta(&self, est: &EstimatorSpec) -> i32 {
        est.assumed_delta_deg.unwrap_or(self.assumed_delta_deg)
    }

    /// True DOA per snapshot, clamped to `[0°, 180°]`.
    pub fn trajectory<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let k = self.snapshots;
        let steps: Vec<i32> = match self.motion {
            TrueMotion::Constant(d) => vec![d; k.saturating_sub(1)],
            TrueMotion::UpThenDown { up, step } => {
                (1..k).map(|i| if i <= up { step } else { -step }).collect()
            }
            TrueMotion::RandomSteps { max } => (1..k).map(|_| rng.random_range(-max..=max)).collect(),
        };
        let grid_step = self.array.grid_step_deg;
        let start = match self.initial_doa {
            InitialDoa::Fixed(t) => t,
            InitialDoa::Uniform => {
                let mut lo = 0.0f64;
                let mut hi = 180.0f64;
                let mut pos = 0.0f64;
                for s in &steps {
                    pos += *s as f64;
                    lo = lo.max(-pos);
                    hi = hi.min(180.0 - pos);
                }
                if hi < lo {
                    lo = 0.0;
                    hi = 180.0;
                }
                let first = (lo / grid_step).ceil() as i64;
                let last = (hi / grid_step).floor() as i64;
                rng.random_range(first..=last) as f64 * grid_step
            }
        };
        let mut out = Vec::with_capacity(k);
        let mut theta = start;
        out.push(theta);
        for s in steps {
            theta = (theta + s as f64).clamp(0.0, 180.0);
            out.push(theta);
        }
        out
    }

    pub fn signal<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.signal_value {
            SignalValue::Fixed(v) => v,
            SignalValue::RandomSign => {
                if rng.random_bool(0.5) {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }
}

pub const SCENARIO_NAMES: [&str; 7] = [
    "endfire",
    "endfire-quarter",
    "non-endfire",
    "random-initial",
    "inc-dec",
    "mismatch",
    "random-walk",
];

/// The seven reference scenarios.
pub fn builtin_scenarios(snapshots: usize, trials: usize, seed: u64) -> Vec<ScenarioSpec> {
    use EstimatorKind::*;
    let three = vec![
        EstimatorSpec::plain(Rvm),
        EstimatorSpec::plain(Mrvm),
        EstimatorSpec::plain(Gibbs),
    ];
    let base = |name: &str, initial, motion, value, assumed| ScenarioSpec {
        name: name.to_string(),
        array: ArrayConfig::standard(),
        initial_doa: initial,
        motion,
        signal_value: value,
        snapshots,
        trials,
        assumed_delta_deg: assumed,
        estimators: three.clone(),
        sigma2_true: 0.4,
        sigma2_init: 0.1,
        seed,
    };
    let endfire = base(
        "endfire",
        InitialDoa::Fixed(20.0),
        TrueMotion::Constant(-1),
        SignalValue::Fixed(1.0),
        -1,
    );
    let quarter = ScenarioSpec {
        name: "endfire-quarter".into(),
        array: ArrayConfig::quarter_wavelength(),
        ..endfire.clone()
    };
    let mut inc_dec = base(
        "inc-dec",
        InitialDoa::Fixed(100.0),
        TrueMotion::UpThenDown { up: 9, step: 1 },
        SignalValue::Fixed(1.0),
        1,
    );
    inc_dec.estimators = vec![
        EstimatorSpec::plain(Rvm),
        EstimatorSpec::plain(Mrvm),
        EstimatorSpec {
            kind: Mrvm,
            assumed_delta_deg: Some(-1),
        },
        EstimatorSpec::plain(Gibbs),
    ];
    vec![
        endfire,
        quarter,
        base(
            "non-endfire",
            InitialDoa::Fixed(100.0),
            TrueMotion::Constant(1),
            SignalValue::Fixed(-1.0),
            1,
        ),
        base(
            "random-initial",
            InitialDoa::Uniform,
            TrueMotion::Constant(1),
            SignalValue::RandomSign,
            1,
        ),
        inc_dec,
        base(
            "mismatch",
            InitialDoa::Fixed(100.0),
            TrueMotion::Constant(1),
            SignalValue::Fixed(-1.0),
            -3,
        ),
        base(
            "random-walk",
            InitialDoa::Fixed(100.0),
            TrueMotion::RandomSteps { max: 3 },
            SignalValue::Fixed(1.0),
            3,
        ),
    ]
}

pub fn builtin_scenario(name: &str, snapshots: usize, trials: usize, seed: u64) -> Result<ScenarioSpec> {
    builtin_scenarios(snapshots, trials, seed)
        .into_iter()
        .find(|s| s.name == name)
        .ok_or_else(|| {
            Error::Config(format!(
                "unknown scenario '{name}' (known: {})",
                SCENARIO_NAMES.join(", ")
            ))
        })
}
