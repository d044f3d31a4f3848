//! DOA error metrics.

use crate::error::{Error, Result};

/// Error charged when an estimator reports no DOA for a true source.
pub const MISS_PENALTY_DEG: f64 = 180.0;

/// RMSE over trials for a single source; a missing estimate costs
/// [`MISS_PENALTY_DEG`].
pub fn rmse_single(truth: &[f64], est: &[Option<f64>]) -> Result<f64> {
    if truth.len() != est.len() {
        return Err(Error::Dimension(format!(
            "{} true angles, {} estimates",
            truth.len(),
            est.len()
        )));
    }
    if truth.is_empty() {
        return Ok(0.0);
    }
    let sq: f64 = truth
        .iter()
        .zip(est)
        .map(|(t, e)| e.map_or(MISS_PENALTY_DEG, |e| (t - e).abs()).powi(2))
        .sum();
    Ok((sq / truth.len() as f64).sqrt())
}

/// Squared errors for one trial after pairing estimates with true angles so
/// that the total squared error is minimal. True angles without a partner
/// cost the miss penalty; surplus estimates are ignored.
pub fn paired_squared_errors(truth: &[f64], est: &[f64]) -> Vec<f64> {
    let l = truth.len();
    if l == 0 {
        return Vec::new();
    }
    let cost = |t: f64, e: Option<f64>| e.map_or(MISS_PENALTY_DEG, |e| (t - e).abs()).powi(2);
    if l <= 7 && est.len() <= 9 {
        // exhaustive assignment; `None` slots stand for misses
        let mut slots: Vec<Option<f64>> = est.iter().copied().map(Some).collect();
        slots.extend(std::iter::repeat_n(None, l));
        let mut best: Option<(f64, Vec<f64>)> = None;
        let mut used = vec![false; slots.len()];
        let mut current = Vec::with_capacity(l);
        assign(truth, &slots, &mut used, &mut current, &cost, &mut best);
        return best.map(|b| b.1).unwrap_or_default();
    }
    // greedy nearest pairing for large sets
    let mut free: Vec<f64> = est.to_vec();
    truth
        .iter()
        .map(|&t| {
            let pick = free
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
                .map(|(i, _)| i);
            cost(t, pick.map(|i| free.swap_remove(i)))
        })
        .collect()
}

fn assign(
    truth: &[f64],
    slots: &[Option<f64>],
    used: &mut [bool],
    current: &mut Vec<f64>,
    cost: &dyn Fn(f64, Option<f64>) -> f64,
    best: &mut Option<(f64, Vec<f64>)>,
) {
    let i = current.len();
    if i == truth.len() {
        let total: f64 = current.iter().sum();
        if best.as_ref().is_none_or(|b| total < b.0) {
            *best = Some((total, current.clone()));
        }
        return;
    }
    for s in 0..slots.len() {
        if used[s] {
            continue;
        }
        used[s] = true;
        current.push(cost(truth[i], slots[s]));
        assign(truth, slots, used, current, cost, best);
        current.pop();
        used[s] = false;
    }
}

/// `sqrt(Σ_q Σ_l |θ_l − θ̂_l|² / Σ_q L_q)` over trials with paired sources.
pub fn rmse(truth: &[Vec<f64>], est: &[Vec<f64>]) -> Result<f64> {
    if truth.len() != est.len() {
        return Err(Error::Dimension(format!(
            "{} trials of truth, {} of estimates",
            truth.len(),
            est.len()
        )));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for (t, e) in truth.iter().zip(est) {
        sum += paired_squared_errors(t, e).iter().sum::<f64>();
        count += t.len();
    }
    if count == 0 {
        return Ok(0.0);
    }
    Ok((sum / count as f64).sqrt())
}
