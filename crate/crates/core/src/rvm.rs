//! Relevance vector machine with a predicted-signal prior mean.
//!
//! The prior on the stacked signal is `x ~ N(x_p, diag(p)⁻¹)`; the classical
//! sparse RVM is the `x_p = 0` case. Hyperparameters `(p, σ²)` are fitted by
//! fixed-point type-II maximum likelihood:
//!
//! ```text
//! Σ  = (σ⁻² ÃᵀÃ + P)⁻¹
//! μ  = Σ (σ⁻² Ãᵀỹ + P x_p)
//! γₙ = 1 − pₙ Σₙₙ
//! pₙ ← γₙ / (μₙ² + x_{p,n}² − x_{p,n} μₙ)
//! σ² ← ‖ỹ − Ãμ‖² / (2M − Σ γₙ)
//! ```
//!
//! Inside the iteration the posterior is evaluated through the `2M × 2M`
//! measurement-space system `S = σ² I + Ã P⁻¹ Ãᵀ` restricted to unpruned
//! columns, which is much smaller than the `2N × 2N` signal-space system.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::array_model::{unstack, C64};
use crate::error::{Error, Result};
use crate::linalg::{chol_logdet, cholesky_jittered, weighted_gram};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RvmConfig {
    /// Gamma shape/rate hyperpriors `β₁..β₄`. With the default diffuse values
    /// they do not enter the objective.
    pub beta: [f64; 4],
    pub max_iters: usize,
    /// Convergence threshold on the largest relative change of `p` and `σ²`.
    pub tol: f64,
    /// Precision ceiling; larger values prune the component.
    pub prune_cap: f64,
    pub sigma2_floor: f64,
    /// Starting precision for every component.
    pub p_init: f64,
    /// Re-estimate `σ²` each iteration. When off, `σ²` stays at its initial value.
    pub estimate_noise: bool,
}

impl Default for RvmConfig {
    fn default() -> Self {
        Self {
            beta: [1e-4; 4],
            max_iters: 1000,
            tol: 1e-3,
            prune_cap: 1e12,
            sigma2_floor: 1e-8,
            p_init: 1.0,
            estimate_noise: true,
        }
    }
}

impl RvmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("tol must be positive, got {}", self.tol)));
        }
        if !(self.prune_cap > 0.0) {
            return Err(Error::Config(format!(
                "prune_cap must be positive, got {}",
                self.prune_cap
            )));
        }
        if !(self.p_init > 0.0 && self.p_init < self.prune_cap) {
            return Err(Error::Config(format!("p_init {} out of range", self.p_init)));
        }
        if !(self.sigma2_floor > 0.0) {
            return Err(Error::Config("sigma2_floor must be positive".into()));
        }
        Ok(())
    }
}

/// Full posterior over the stacked signal.
#[derive(Clone, Debug)]
pub struct Posterior {
    pub sigma: DMatrix<f64>,
    pub mu: DVector<f64>,
}

/// Iteration state of the hyperparameter fit.
#[derive(Clone, Debug)]
pub struct RvmState {
    pub p: Vec<f64>,
    pub pruned: Vec<bool>,
    pub sigma2: f64,
    pub x_p: DVector<f64>,
    pub mu: DVector<f64>,
    /// Diagonal of `Σ`; zero for pruned components.
    pub sigma_diag: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct RvmResult {
    /// Stacked estimate `[Re x; Im x]`.
    pub x_opt: DVector<f64>,
    pub x_complex: DVector<C64>,
    pub p_opt: Vec<f64>,
    pub pruned: Vec<bool>,
    pub sigma2_opt: f64,
    pub iters: usize,
    pub converged: bool,
    /// Log marginal likelihood after each posterior refresh.
    pub evidence: Vec<f64>,
}

fn check_dims(a: &DMatrix<f64>, y: &DVector<f64>, p: &[f64], x_p: &DVector<f64>) -> Result<()> {
    if a.nrows() != y.len() || a.ncols() != p.len() || a.ncols() != x_p.len() {
        return Err(Error::Dimension(format!(
            "design {}x{}, measurement {}, precisions {}, prediction {}",
            a.nrows(),
            a.ncols(),
            y.len(),
            p.len(),
            x_p.len()
        )));
    }
    Ok(())
}

fn check_hyper(p: &[f64], sigma2: f64) -> Result<()> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::Domain(format!(
            "noise variance must be positive, got {sigma2}"
        )));
    }
    if let Some(v) = p.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::Domain(format!(
            "precision must be positive and finite, got {v}"
        )));
    }
    Ok(())
}

/// Posterior covariance and mean in signal space.
pub fn posterior_stats(
    a: &DMatrix<f64>,
    y: &DVector<f64>,
    p: &[f64],
    sigma2: f64,
    x_p: &DVector<f64>,
) -> Result<Posterior> {
    check_dims(a, y, p, x_p)?;
    check_hyper(p, sigma2)?;
    let tau = 1.0 / sigma2;
    let mut precision = a.tr_mul(a) * tau;
    for (i, &pi) in p.iter().enumerate() {
        precision[(i, i)] += pi;
    }
    let chol = cholesky_jittered(&precision, "posterior precision")?;
    let rhs = a.tr_mul(y) * tau + DVector::from_fn(p.len(), |i, _| p[i] * x_p[i]);
    let mu = chol.solve(&rhs);
    let mut sigma = chol.inverse();
    crate::linalg::symmetrize(&mut sigma);
    Ok(Posterior { sigma, mu })
}

/// Log marginal likelihood `log P(ỹ | σ², p, x_p)` in the form
/// `(2πσ²)^{-M} |Σ|^{½} |P|^{½} exp{-½[ỹᵀBỹ + x_pᵀC x_p − 2σ⁻² ỹᵀÃΣP x_p]}`
/// with `B = (σ²I + ÃP⁻¹Ãᵀ)⁻¹` and `C = P − PΣP`.
pub fn log_marginal(
    a: &DMatrix<f64>,
    y: &DVector<f64>,
    p: &[f64],
    sigma2: f64,
    x_p: &DVector<f64>,
) -> Result<f64> {
    check_dims(a, y, p, x_p)?;
    check_hyper(p, sigma2)?;
    let half_m = y.len() as f64 / 2.0;
    let inv_p: Vec<f64> = p.iter().map(|v| 1.0 / v).collect();
    let mut s = weighted_gram(a, &inv_p);
    for i in 0..s.nrows() {
        s[(i, i)] += sigma2;
    }
    let s_chol = cholesky_jittered(&s, "marginal covariance")
        .map_err(|e| Error::Numerical(format!("singular B: {e}")))?;
    let y_b_y = y.dot(&s_chol.solve(y));

    let post = posterior_stats(a, y, p, sigma2, x_p)?;
    let sigma_chol = cholesky_jittered(&post.sigma, "posterior covariance")?;
    let logdet_sigma = chol_logdet(&sigma_chol);
    let logdet_p: f64 = p.iter().map(|v| v.ln()).sum();

    let px = DVector::from_fn(p.len(), |i, _| p[i] * x_p[i]);
    let sigma_px = &post.sigma * &px;
    let x_c_x = x_p.dot(&px) - px.dot(&sigma_px);
    let cross = y.dot(&(a * &sigma_px)) / sigma2;

    Ok(
        -half_m * (2.0 * PI).ln() - half_m * sigma2.ln() + 0.5 * logdet_sigma + 0.5 * logdet_p
            - 0.5 * (y_b_y + x_c_x - 2.0 * cross),
    )
}

/// The same objective written through the posterior mean:
/// `-½(2M log 2π + 2M log σ² − log|Σ| − log|P| + σ⁻²‖ỹ − Ãμ‖² + (μ − x_p)ᵀP(μ − x_p))`.
pub fn log_marginal_expanded(
    a: &DMatrix<f64>,
    y: &DVector<f64>,
    p: &[f64],
    sigma2: f64,
    x_p: &DVector<f64>,
) -> Result<f64> {
    let post = posterior_stats(a, y, p, sigma2, x_p)?;
    let two_m = y.len() as f64;
    let sigma_chol = cholesky_jittered(&post.sigma, "posterior covariance")?;
    let logdet_sigma = chol_logdet(&sigma_chol);
    let logdet_p: f64 = p.iter().map(|v| v.ln()).sum();
    let resid = y - a * &post.mu;
    let prior_dev: f64 = (0..p.len()).map(|i| p[i] * (post.mu[i] - x_p[i]).powi(2)).sum();
    Ok(-0.5
        * (two_m * (2.0 * PI).ln() + two_m * sigma2.ln() - logdet_sigma - logdet_p
            + resid.norm_squared() / sigma2
            + prior_dev))
}

impl RvmState {
    pub fn new(n: usize, x_p: DVector<f64>, sigma2: f64, config: &RvmConfig) -> Self {
        Self {
            p: vec![config.p_init; n],
            pruned: vec![false; n],
            sigma2,
            mu: x_p.clone(),
            x_p,
            sigma_diag: vec![0.0; n],
        }
    }

    fn active(&self) -> Vec<usize> {
        (0..self.p.len()).filter(|&i| !self.pruned[i]).collect()
    }

    /// `γₙ = 1 − pₙ Σₙₙ`, zero for pruned components.
    pub fn gamma(&self) -> Vec<f64> {
        self.p
            .iter()
            .zip(&self.sigma_diag)
            .zip(&self.pruned)
            .map(|((p, s), &pr)| if pr { 0.0 } else { 1.0 - p * s })
            .collect()
    }

    /// Recomputes `μ` and `diag Σ` for the current hyperparameters and
    /// returns the log marginal likelihood. Pruned components are pinned to
    /// their predicted value.
    pub fn refresh(&mut self, a: &DMatrix<f64>, y: &DVector<f64>) -> Result<f64> {
        let active = self.active();
        let rows = a.nrows();
        let a_act = a.select_columns(active.iter());
        let inv_p: Vec<f64> = active.iter().map(|&i| 1.0 / self.p[i]).collect();
        let mut s = weighted_gram(&a_act, &inv_p);
        for i in 0..rows {
            s[(i, i)] += self.sigma2;
        }
        let chol = cholesky_jittered(&s, "measurement covariance")?;
        let resid0 = y - a * &self.x_p;
        let w = chol.solve(&resid0);
        let back = a_act.tr_mul(&w);

        // L⁻¹ Ã_active; column norms give aₙᵀ S⁻¹ aₙ.
        let mut v = a_act.clone();
        chol.l_dirty().solve_lower_triangular_mut(&mut v);

        self.mu.copy_from(&self.x_p);
        self.sigma_diag.iter_mut().for_each(|s| *s = 0.0);
        for (k, &i) in active.iter().enumerate() {
            self.mu[i] += inv_p[k] * back[k];
            let gamma = v.column(k).norm_squared() * inv_p[k];
            self.sigma_diag[i] = (1.0 - gamma) * inv_p[k];
        }

        let logdet = chol_logdet(&chol);
        Ok(-0.5 * (rows as f64 * (2.0 * PI).ln() + logdet + resid0.dot(&w)))
    }

    /// Full `Σ` for the current hyperparameters.
    pub fn full_covariance(&self, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let zero_y = DVector::zeros(a.nrows());
        Ok(posterior_stats(a, &zero_y, &self.p, self.sigma2, &self.x_p)?.sigma)
    }
}

/// Precision fixed-point step. Returns the new precisions and pruning flags.
///
/// A non-positive denominator or a value above the cap prunes the component;
/// pruned entries are held at the cap.
pub fn update_precisions(state: &RvmState, config: &RvmConfig) -> (Vec<f64>, Vec<bool>) {
    let gamma = state.gamma();
    let mut p = state.p.clone();
    let mut pruned = state.pruned.clone();
    for i in 0..p.len() {
        if pruned[i] {
            continue;
        }
        let (mu, xp) = (state.mu[i], state.x_p[i]);
        let denom = mu * mu + xp * xp - xp * mu;
        let next = gamma[i] / denom;
        if !(denom > 0.0) || !(next > 0.0) || next > config.prune_cap || !next.is_finite() {
            p[i] = config.prune_cap;
            pruned[i] = true;
        } else {
            p[i] = next;
        }
    }
    (p, pruned)
}

/// Noise fixed-point step `σ² = ‖ỹ − Ãμ‖² / (2M − Σγ)`, floored.
pub fn update_noise(state: &RvmState, a: &DMatrix<f64>, y: &DVector<f64>, config: &RvmConfig) -> Result<f64> {
    let gamma_sum: f64 = state.gamma().iter().sum();
    let denom = y.len() as f64 - gamma_sum;
    if !(denom > 0.0) {
        return Err(Error::Numerical(format!(
            "noise update denominator {denom} <= 0 (sum of gamma {gamma_sum}, sigma2 {})",
            state.sigma2
        )));
    }
    let resid = y - a * &state.mu;
    Ok((resid.norm_squared() / denom).max(config.sigma2_floor))
}

fn max_rel_change(old: &RvmState, p: &[f64], pruned: &[bool], sigma2: f64) -> f64 {
    let mut worst = ((sigma2 - old.sigma2) / old.sigma2).abs();
    for i in 0..p.len() {
        if old.pruned[i] {
            continue;
        }
        if pruned[i] {
            return f64::INFINITY;
        }
        worst = worst.max(((p[i] - old.p[i]) / old.p[i]).abs());
    }
    worst
}

/// Fits `(p, σ²)` and returns the posterior-mean estimate at the optimum.
pub fn run_modified_rvm(
    a: &DMatrix<f64>,
    y: &DVector<f64>,
    x_p: &DVector<f64>,
    config: &RvmConfig,
    sigma2_init: f64,
) -> Result<RvmResult> {
    config.validate()?;
    let n = a.ncols();
    check_dims(a, y, &vec![1.0; n], x_p)?;
    if !(sigma2_init > 0.0) {
        return Err(Error::Domain(format!(
            "initial noise variance must be positive, got {sigma2_init}"
        )));
    }
    if !n.is_multiple_of(2) {
        return Err(Error::Dimension(format!("stacked signal length {n} is odd")));
    }

    let mut state = RvmState::new(n, x_p.clone(), sigma2_init, config);
    let mut evidence = Vec::new();
    let mut best: Option<(f64, Vec<f64>, Vec<bool>, f64)> = None;
    let mut converged = false;
    let mut iters = 0;

    while iters < config.max_iters {
        iters += 1;
        let ev = state.refresh(a, y)?;
        evidence.push(ev);
        if best.as_ref().is_none_or(|b| ev >= b.0) {
            best = Some((ev, state.p.clone(), state.pruned.clone(), state.sigma2));
        }
        let (p, pruned) = update_precisions(&state, config);
        let sigma2 = if config.estimate_noise {
            update_noise(&state, a, y, config)?
        } else {
            state.sigma2
        };
        let change = max_rel_change(&state, &p, &pruned, sigma2);
        state.p = p;
        state.pruned = pruned;
        state.sigma2 = sigma2;
        if change < config.tol {
            converged = true;
            break;
        }
    }

    if !converged {
        if let Some((_, p, pruned, sigma2)) = best {
            state.p = p;
            state.pruned = pruned;
            state.sigma2 = sigma2;
        }
    }
    let final_ev = state.refresh(a, y)?;
    evidence.push(final_ev);

    let x_opt = state.mu.clone();
    Ok(RvmResult {
        x_complex: unstack(&x_opt),
        x_opt,
        p_opt: state.p,
        pruned: state.pruned,
        sigma2_opt: state.sigma2,
        iters,
        converged,
        evidence,
    })
}
