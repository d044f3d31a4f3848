//! Run configuration shared by the CLI commands.
//!
//! Command-line flags fill a [`RunConfig`]; a JSON config file, when given,
//! overrides every field it sets. The resolved result is what `run.json`
//! records.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::array_model::ArrayConfig;
use crate::doa::ThresholdConfig;
use crate::error::{Error, Result};
use crate::gibbs::GibbsConfig;
use crate::harness::runner::EstimatorSettings;
use crate::harness::scenario::{
    builtin_scenario, builtin_scenarios, EstimatorKind, ScenarioSpec, SCENARIO_NAMES,
};
use crate::rvm::RvmConfig;

pub const DEFAULT_SNAPSHOTS: usize = 20;
pub const DEFAULT_TRIALS: usize = 100;
pub const DEFAULT_SEED: u64 = 1;

/// Every field is optional so that a config file can set any subset.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Option<String>,
    pub estimator: Option<String>,
    pub trials: Option<usize>,
    pub snapshots: Option<usize>,
    pub eta: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub trial: Option<usize>,
    pub assumed_delta_deg: Option<i32>,
    pub sigma2_init: Option<f64>,
    pub sigma2_true: Option<f64>,
    pub array: Option<ArrayConfig>,
    pub rvm: Option<RvmConfig>,
    pub gibbs: Option<GibbsConfig>,
    pub sparse_state: Option<bool>,
}

macro_rules! take_some {
    ($dst:ident, $src:ident, $($f:ident),*) => {
        $(if $src.$f.is_some() { $dst.$f = $src.$f; })*
    };
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("run config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Fields set in `file` replace those in `self`.
    pub fn overridden_by(mut self, file: RunConfig) -> Self {
        take_some!(
            self,
            file,
            scenario,
            estimator,
            trials,
            snapshots,
            eta,
            seed,
            out,
            trial,
            assumed_delta_deg,
            sigma2_init,
            sigma2_true,
            array,
            rvm,
            gibbs,
            sparse_state
        );
        self
    }

    pub fn settings(&self) -> Result<EstimatorSettings> {
        let settings = EstimatorSettings {
            rvm: self.rvm.clone().unwrap_or_default(),
            gibbs: self.gibbs.clone().unwrap_or_default(),
            threshold: match self.eta {
                Some(eta) => ThresholdConfig::new(eta)?,
                None => ThresholdConfig::default(),
            },
            sparse_state: self.sparse_state.unwrap_or(false),
        };
        settings.rvm.validate()?;
        settings.gibbs.validate()?;
        Ok(settings)
    }

    /// Estimator filter; `None` keeps every estimator of a scenario.
    pub fn estimator_filter(&self) -> Result<Option<EstimatorKind>> {
        match self.estimator.as_deref() {
            None | Some("all") => Ok(None),
            Some(name) => EstimatorKind::parse(name).map(Some),
        }
    }

    /// Scenario specs after applying every override.
    pub fn scenarios(&self) -> Result<Vec<ScenarioSpec>> {
        let snapshots = self.snapshots.unwrap_or(DEFAULT_SNAPSHOTS);
        let trials = self.trials.unwrap_or(DEFAULT_TRIALS);
        let seed = self.seed.unwrap_or(DEFAULT_SEED);
        let mut specs = match self.scenario.as_deref() {
            None | Some("all") => builtin_scenarios(snapshots, trials, seed),
            Some(name) => vec![builtin_scenario(name, snapshots, trials, seed).map_err(|_| {
                Error::Config(format!(
                    "unknown scenario '{name}', expected one of {} or all",
                    SCENARIO_NAMES.join(", ")
                ))
            })?],
        };
        let filter = self.estimator_filter()?;
        for spec in &mut specs {
            if let Some(kind) = filter {
                spec.estimators.retain(|e| e.kind == kind);
            }
            if let Some(d) = self.assumed_delta_deg {
                spec.assumed_delta_deg = d;
            }
            if let Some(v) = self.sigma2_init {
                spec.sigma2_init = v;
            }
            if let Some(v) = self.sigma2_true {
                spec.sigma2_true = v;
            }
            if let Some(array) = &self.array {
                spec.array = array.clone();
            }
            spec.validate()?;
        }
        Ok(specs)
    }
}
