//! Result files written by a benchmark run.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::harness::runner::{improvement_pct, ResultRow, ScenarioReport, SummaryRow};

pub const RESULTS_CSV: &str = "results.csv";
pub const ESTIMATES_CSV: &str = "estimates.csv";
pub const SUMMARY_TXT: &str = "summary.txt";
pub const PLOT_SCRIPT: &str = "plot_rmse.py";

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::Parse(format!("{}: {other:?}", path.display())),
    }
}

pub fn write_results_csv(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_results_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    r.deserialize()
        .map(|row| row.map_err(|e| csv_err(path, e)))
        .collect()
}

/// Per-trial truth and primary estimate for every estimator and snapshot.
pub fn write_estimates_csv(path: &Path, reports: &[ScenarioReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["scenario", "estimator", "trial", "k", "true_deg", "estimate_deg"])
        .map_err(|e| csv_err(path, e))?;
    for report in reports {
        for trial in &report.trials {
            for (label, trace) in report.labels.iter().zip(&trial.traces) {
                let Ok(trace) = trace else { continue };
                for (k, (truth, est)) in trial.truth.iter().zip(&trace.estimates).enumerate() {
                    let est = est.map(|v| v.to_string()).unwrap_or_default();
                    w.write_record([
                        report.spec.name.as_str(),
                        label,
                        &trial.trial.to_string(),
                        &(k + 1).to_string(),
                        &truth.to_string(),
                        &est,
                    ])
                    .map_err(|e| csv_err(path, e))?;
                }
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Plain-text table of average RMSE and runtime per scenario and estimator.
pub fn summary_table(summary: &[SummaryRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<16} {:<10} {:>10} {:>10} {:>12} {:>8} {:>7} {:>7}",
        "scenario", "estimator", "avg_rmse", "max_rmse", "runtime_s", "vs_rvm", "trials", "failed"
    );
    for row in summary {
        let baseline = summary
            .iter()
            .find(|s| s.scenario == row.scenario && s.estimator == "rvm")
            .map(|s| s.average_rmse_deg);
        let vs = match baseline {
            Some(b) if row.estimator != "rvm" && b > 0.0 => {
                format!("{:+.1}%", improvement_pct(b, row.average_rmse_deg))
            }
            _ => "-".to_string(),
        };
        let _ = writeln!(
            out,
            "{:<16} {:<10} {:>10.3} {:>10.3} {:>12.5} {:>8} {:>7} {:>7}",
            row.scenario,
            row.estimator,
            row.average_rmse_deg,
            row.max_rmse_deg,
            row.average_runtime_s,
            vs,
            row.trials,
            row.failed_trials
        );
    }
    out
}

const PLOT_SOURCE: &str = r#"#!/usr/bin/env python3
"""Plot RMSE against snapshot index from results.csv, one figure per scenario."""
import csv
import sys
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).parent
curves = defaultdict(lambda: defaultdict(list))
with open(here / "results.csv", newline="") as fh:
    for row in csv.DictReader(fh):
        curves[row["scenario"]][row["estimator"]].append((int(row["k"]), float(row["rmse_deg"])))

for scenario, by_est in curves.items():
    fig, ax = plt.subplots(figsize=(6, 4))
    for est, pts in sorted(by_est.items()):
        pts.sort()
        ax.plot([k for k, _ in pts], [r for _, r in pts], marker="o", ms=3, label=est)
    ax.set_xlabel("snapshot k")
    ax.set_ylabel("RMSE (deg)")
    ax.set_yscale("log")
    ax.set_title(scenario)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(here / f"rmse_{scenario}.png", dpi=120)
    plt.close(fig)
"#;

/// Writes results, estimates, summary and plot script into `dir`.
pub fn emit_results(dir: &Path, reports: &[ScenarioReport]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let rows: Vec<ResultRow> = reports.iter().flat_map(|r| r.rows.iter().cloned()).collect();
    let summary: Vec<SummaryRow> = reports.iter().flat_map(|r| r.summary.iter().cloned()).collect();

    let results = dir.join(RESULTS_CSV);
    write_results_csv(&results, &rows)?;
    let estimates = dir.join(ESTIMATES_CSV);
    write_estimates_csv(&estimates, reports)?;
    let table = dir.join(SUMMARY_TXT);
    fs::write(&table, summary_table(&summary)).map_err(|e| Error::io(&table, e))?;
    let plot = dir.join(PLOT_SCRIPT);
    fs::write(&plot, PLOT_SOURCE).map_err(|e| Error::io(&plot, e))?;
    Ok(vec![results, estimates, table, plot])
}
