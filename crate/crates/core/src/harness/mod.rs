//! Monte-Carlo benchmark harness.

pub mod config;
pub mod metrics;
pub mod output;
pub mod runner;
pub mod scenario;

pub use config::RunConfig;
pub use metrics::{rmse, rmse_single, MISS_PENALTY_DEG};
pub use output::emit_results;
pub use runner::{improvement_pct, run_scenario, EstimatorSettings, ResultRow, ScenarioReport, SummaryRow};
pub use scenario::{builtin_scenario, builtin_scenarios, EstimatorKind, EstimatorSpec, ScenarioSpec};
