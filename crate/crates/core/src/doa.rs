//! Energy-retention thresholding of an estimated signal vector into DOAs.

use std::cmp::Ordering;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::array_model::C64;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThresholdConfig {
    /// Fraction of the total energy to retain, in `(0, 1]`.
    pub eta: f64,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self { eta: 0.9 }
    }
}

impl ThresholdConfig {
    pub fn new(eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::Config(format!("eta must lie in (0, 1], got {eta}")));
        }
        Ok(Self { eta })
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DoaEstimate {
    /// Retained angles in degrees, ascending.
    pub angles: Vec<f64>,
    pub amplitudes: Vec<C64>,
    /// Grid indices matching `angles`.
    pub indices: Vec<usize>,
}

impl DoaEstimate {
    /// Estimated source count.
    pub fn source_count(&self) -> usize {
        self.angles.len()
    }

    /// Dense vector with every non-retained entry zeroed.
    pub fn to_sparse(&self, len: usize) -> DVector<C64> {
        let mut out = DVector::zeros(len);
        for (&i, &v) in self.indices.iter().zip(&self.amplitudes) {
            out[i] = v;
        }
        out
    }
}

/// Grid indices ordered by decreasing energy, ties toward the smaller index.
fn energy_order(energy: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..energy.len()).collect();
    order.sort_by(|&a, &b| match energy[b].partial_cmp(&energy[a]) {
        Some(Ordering::Equal) | None => a.cmp(&b),
        Some(o) => o,
    });
    order
}

/// Indices of the strongest entries whose cumulative energy first reaches
/// `eta` of the total, ascending. Empty for an all-zero signal.
pub fn retained_indices(x: &DVector<C64>, config: ThresholdConfig) -> Vec<usize> {
    let energy: Vec<f64> = x.iter().map(|v| v.norm_sqr()).collect();
    let total: f64 = energy.iter().sum();
    if !(total > 0.0) {
        return Vec::new();
    }
    let target = config.eta * total;
    let mut kept = Vec::new();
    let mut acc = 0.0;
    for i in energy_order(&energy) {
        if energy[i] == 0.0 {
            break;
        }
        kept.push(i);
        acc += energy[i];
        if acc >= target {
            break;
        }
    }
    kept.sort_unstable();
    kept
}

/// `x` with every entry outside [`retained_indices`] set to zero.
pub fn sparsify(x: &DVector<C64>, config: ThresholdConfig) -> DVector<C64> {
    let mut out = DVector::zeros(x.len());
    for i in retained_indices(x, config) {
        out[i] = x[i];
    }
    out
}

/// Keeps the strongest entries until their cumulative energy reaches
/// `eta` of the total; the kept entries are the DOA estimates.
pub fn threshold(x: &DVector<C64>, thetas: &[f64], config: ThresholdConfig) -> Result<DoaEstimate> {
    if x.len() != thetas.len() {
        return Err(Error::Dimension(format!(
            "signal has {} entries, grid has {}",
            x.len(),
            thetas.len()
        )));
    }
    let kept = retained_indices(x, config);
    Ok(DoaEstimate {
        angles: kept.iter().map(|&i| thetas[i]).collect(),
        amplitudes: kept.iter().map(|&i| x[i]).collect(),
        indices: kept,
    })
}

/// Retained angle with the largest magnitude; ties go to the smaller angle.
pub fn primary_doa(est: &DoaEstimate) -> Option<f64> {
    let mut best: Option<(f64, f64)> = None;
    for (&angle, amp) in est.angles.iter().zip(&est.amplitudes) {
        let mag = amp.norm();
        match best {
            Some((_, m)) if mag <= m => {}
            _ => best = Some((angle, mag)),
        }
    }
    best.map(|(a, _)| a)
}
