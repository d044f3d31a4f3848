use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use serde_json::json;

use doa_bcs::array_model::C64;
use doa_bcs::bcskf::MotionModel;
use doa_bcs::doa::primary_doa;
use doa_bcs::harness::output::summary_table;
use doa_bcs::harness::runner::{estimate_sequence, simulate_trial};
use doa_bcs::harness::{emit_results, run_scenario, EstimatorKind, RunConfig, SummaryRow};
use doa_bcs::{Error, Result};

#[derive(Parser)]
#[command(name = "doa-bcs", version, about = "Sparse Bayesian DOA tracking benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte-Carlo RMSE benchmark over built-in scenarios.
    Bench(Common),
    /// Write the noisy snapshots of one trial as CSV (`k,true_deg,m,re,im`).
    Simulate(Common),
    /// Estimate a DOA sequence from a snapshot CSV.
    Estimate {
        #[command(flatten)]
        common: Common,
        /// Snapshot CSV in the format written by `simulate`.
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// Scenario name, or `all`.
    #[arg(long)]
    scenario: Option<String>,
    /// rvm, mrvm, gibbs or all.
    #[arg(long)]
    estimator: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    snapshots: Option<usize>,
    /// Fraction of signal energy kept when thresholding.
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Trial index to simulate.
    #[arg(long)]
    trial: Option<usize>,
    /// Assumed DOA change per snapshot in degrees.
    #[arg(long, allow_hyphen_values = true)]
    delta: Option<i32>,
    /// JSON run config; its fields override the flags above.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig> {
        let flags = RunConfig {
            scenario: self.scenario.clone(),
            estimator: self.estimator.clone(),
            trials: self.trials,
            snapshots: self.snapshots,
            eta: self.eta,
            seed: self.seed,
            out: self.out.clone(),
            trial: self.trial,
            assumed_delta_deg: self.delta,
            ..Default::default()
        };
        match &self.config {
            Some(path) => Ok(flags.overridden_by(RunConfig::load(path)?)),
            None => Ok(flags),
        }
    }
}

fn out_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn write_run_json(dir: &Path, value: serde_json::Value) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join("run.json");
    let text = serde_json::to_string_pretty(&value).map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

fn bench(cfg: RunConfig) -> Result<()> {
    let settings = cfg.settings()?;
    let specs = cfg.scenarios()?;
    let dir = out_dir(&cfg);
    write_run_json(
        &dir,
        json!({ "command": "bench", "out": dir, "settings": settings, "scenarios": specs }),
    )?;
    let mut reports = Vec::with_capacity(specs.len());
    for spec in &specs {
        if spec.estimators.is_empty() {
            continue;
        }
        eprintln!(
            "running {} ({} trials, {} snapshots)",
            spec.name, spec.trials, spec.snapshots
        );
        reports.push(run_scenario(spec, &settings)?);
    }
    emit_results(&dir, &reports)?;
    let summary: Vec<SummaryRow> = reports.iter().flat_map(|r| r.summary.iter().cloned()).collect();
    print!("{}", summary_table(&summary));
    Ok(())
}

fn single_scenario(cfg: &RunConfig) -> Result<doa_bcs::harness::ScenarioSpec> {
    if matches!(cfg.scenario.as_deref(), None | Some("all")) {
        return Err(Error::Config("this command needs a single --scenario".into()));
    }
    Ok(cfg.scenarios()?.remove(0))
}

fn simulate(cfg: RunConfig) -> Result<()> {
    let spec = single_scenario(&cfg)?;
    let trial = cfg.trial.unwrap_or(0);
    let grid = spec.array.build()?;
    let data = simulate_trial(&spec, &grid, trial)?;
    let dir = out_dir(&cfg);
    write_run_json(
        &dir,
        json!({ "command": "simulate", "out": dir, "trial": trial, "signal_value": data.value, "scenario": spec }),
    )?;
    let path = dir.join("snapshots.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| Error::Parse(e.to_string()))?;
    let csv_err = |e: csv::Error| Error::Parse(format!("{}: {e}", path.display()));
    w.write_record(["k", "true_deg", "m", "re", "im"])
        .map_err(csv_err)?;
    for (k, (theta, y)) in data.truth.iter().zip(&data.snapshots).enumerate() {
        for (m, v) in y.iter().enumerate() {
            w.write_record([
                (k + 1).to_string(),
                theta.to_string(),
                m.to_string(),
                v.re.to_string(),
                v.im.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn read_snapshots(path: &Path) -> Result<Vec<DVector<C64>>> {
    #[derive(serde::Deserialize)]
    struct Row {
        k: usize,
        m: usize,
        re: f64,
        im: f64,
    }
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let mut by_k: BTreeMap<usize, BTreeMap<usize, C64>> = BTreeMap::new();
    for row in r.deserialize() {
        let row: Row = row.map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        by_k.entry(row.k)
            .or_default()
            .insert(row.m, C64::new(row.re, row.im));
    }
    by_k.into_iter()
        .map(|(k, entries)| {
            let m = entries.len();
            if entries.keys().copied().ne(0..m) {
                return Err(Error::Parse(format!(
                    "snapshot {k} has non-contiguous antenna indices"
                )));
            }
            Ok(DVector::from_iterator(m, entries.into_values()))
        })
        .collect()
}

fn estimate(cfg: RunConfig, input: &Path) -> Result<()> {
    let scenario = RunConfig {
        scenario: Some(cfg.scenario.clone().unwrap_or_else(|| "endfire".into())),
        estimator: None,
        ..cfg.clone()
    };
    let spec = single_scenario(&scenario)?;
    let kind = match cfg.estimator.as_deref() {
        Some(name) if name != "all" => EstimatorKind::parse(name)?,
        _ => return Err(Error::Config("estimate needs --estimator rvm|mrvm|gibbs".into())),
    };
    let settings = cfg.settings()?;
    let seed = cfg.seed.unwrap_or(spec.seed);
    let motion = MotionModel::from_degrees(spec.assumed_delta_deg as f64, spec.array.grid_step_deg)?;
    let grid = spec.array.build()?;
    let snapshots = read_snapshots(input)?;
    let dir = out_dir(&cfg);
    write_run_json(
        &dir,
        json!({
            "command": "estimate", "input": input, "out": dir, "estimator": kind,
            "seed": seed, "settings": settings, "array": spec.array,
            "assumed_delta_deg": spec.assumed_delta_deg, "sigma2_init": spec.sigma2_init,
        }),
    )?;
    let estimates = estimate_sequence(&grid, kind, motion, &settings, spec.sigma2_init, seed, &snapshots)?;
    let path = dir.join("estimates.csv");
    let mut text = String::from("k,estimate_deg\n");
    for (k, est) in estimates.iter().enumerate() {
        let v = primary_doa(est).map(|v| v.to_string()).unwrap_or_default();
        text.push_str(&format!("{},{v}\n", k + 1));
    }
    fs::write(&path, &text).map_err(|e| Error::io(&path, e))?;
    print!("{text}");
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Bench(c) => bench(c.resolve()?),
        Command::Simulate(c) => simulate(c.resolve()?),
        Command::Estimate { common, input } => estimate(common.resolve()?, &input),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
