//! Independent oracles shared by the property suites and the acceptance
//! report. Each check returns the worst error it saw so callers can either
//! assert on it or print it.

#![allow(dead_code)]

use std::path::Path;
use std::process::Command;

use doa_bcs::array_model::{
    coupling_matrix, realify_matrix, stack, steering_vector, synthesize_snapshot, unstack, ArrayConfig,
    ArrayGeometry, CouplingSpec, SteeringGrid, C64,
};
use doa_bcs::bcskf::kalman_update;
use doa_bcs::gibbs::{
    conditional_signal_params, init_state, sample_indicators, sample_noise_precision, sample_precision,
    sample_signal, GibbsConfig,
};
use doa_bcs::rvm::{
    log_marginal, log_marginal_expanded, posterior_stats, run_modified_rvm, update_noise, update_precisions,
    RvmConfig, RvmState,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

pub fn random_vector(rng: &mut ChaCha8Rng, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| rng.random_range(-1.0..1.0))
}

/// Log-uniform positive values over `[lo, hi]`.
pub fn random_positive(rng: &mut ChaCha8Rng, len: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..len)
        .map(|_| (rng.random_range(lo.ln()..hi.ln())).exp())
        .collect()
}

pub fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let b = random_matrix(rng, n, n);
    &b * b.transpose() + DMatrix::identity(n, n) * 0.5
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

/// Dense posterior from the normal equations, inverted explicitly.
fn dense_posterior(
    a: &DMatrix<f64>,
    y: &DVector<f64>,
    p: &[f64],
    sigma2: f64,
    x_p: &DVector<f64>,
) -> (DMatrix<f64>, DVector<f64>) {
    let mut h = a.transpose() * a / sigma2;
    for (i, v) in p.iter().enumerate() {
        h[(i, i)] += v;
    }
    let sigma = h.clone().try_inverse().expect("invertible precision");
    let rhs = a.transpose() * y / sigma2 + DVector::from_fn(p.len(), |i, _| p[i] * x_p[i]);
    (sigma.clone(), sigma * rhs)
}

/// Classical zero-mean RVM re-estimates written from the textbook form:
/// `pₙ = γₙ/μₙ²`, `σ² = ‖ỹ − Ãμ‖²/(2M − Σγ)`.
fn classical_update(
    a: &DMatrix<f64>,
    y: &DVector<f64>,
    p: &[f64],
    mu: &DVector<f64>,
    sigma_diag: &[f64],
) -> (Vec<f64>, f64) {
    let gamma: Vec<f64> = p.iter().zip(sigma_diag).map(|(p, s)| 1.0 - p * s).collect();
    let p_new = gamma.iter().zip(mu.iter()).map(|(g, m)| g / (m * m)).collect();
    let resid = y - a * mu;
    let sigma2 = resid.norm_squared() / (y.len() as f64 - gamma.iter().sum::<f64>());
    (p_new, sigma2)
}

/// Largest relative gap between the prediction-centred updates called with
/// `x_p = 0` and the classical updates on the same state.
pub fn rvm_reduction_gap(cases: usize, seed: u64) -> f64 {
    let mut rng = rng(seed);
    let cfg = RvmConfig {
        prune_cap: f64::MAX,
        sigma2_floor: 0.0,
        ..RvmConfig::default()
    };
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let rows = rng.random_range(4..12usize) * 2;
        let cols = rng.random_range(3..10usize) * 2;
        let a = random_matrix(&mut rng, rows, cols);
        let y = random_vector(&mut rng, rows);
        let mut state = RvmState::new(cols, DVector::zeros(cols), rng.random_range(0.05..2.0), &cfg);
        state.p = random_positive(&mut rng, cols, 1e-2, 1e2);
        state.refresh(&a, &y).unwrap();

        let (p_lib, pruned) = update_precisions(&state, &cfg);
        let s_lib = update_noise(&state, &a, &y, &cfg).unwrap();
        let (p_ref, s_ref) = classical_update(&a, &y, &state.p, &state.mu, &state.sigma_diag);
        assert!(
            pruned.iter().all(|p| !p),
            "no component should prune without a cap"
        );
        for (l, r) in p_lib.iter().zip(&p_ref) {
            worst = worst.max(rel(*l, *r));
        }
        worst = worst.max(rel(s_lib, s_ref));
    }
    worst
}

pub struct PosteriorGaps {
    /// `μ` against the penalized least-squares minimizer, relative.
    pub mean: f64,
    /// `‖Σ·(σ⁻²ÃᵀÃ + P) − I‖`, max entry.
    pub covariance_residual: f64,
    /// Gradient of the penalized objective at `μ`, max entry.
    pub gradient: f64,
    /// Incremental refresh (`μ`, `diag Σ`) against the dense posterior, relative.
    pub refresh: f64,
}

/// Posterior mean and covariance against independent oracles.
pub fn posterior_gaps(cases: usize, seed: u64) -> PosteriorGaps {
    let mut rng = rng(seed);
    let mut out = PosteriorGaps {
        mean: 0.0,
        covariance_residual: 0.0,
        gradient: 0.0,
        refresh: 0.0,
    };
    for _ in 0..cases {
        let rows = rng.random_range(2..8usize) * 2;
        let cols = rng.random_range(2..8usize) * 2;
        let a = random_matrix(&mut rng, rows, cols);
        let y = random_vector(&mut rng, rows);
        let x_p = random_vector(&mut rng, cols);
        let p = random_positive(&mut rng, cols, 0.1, 10.0);
        let sigma2 = rng.random_range(0.1..2.0);

        let post = posterior_stats(&a, &y, &p, sigma2, &x_p).unwrap();

        // Minimizer of σ⁻²‖ỹ − Ãx‖² + (x − x_p)ᵀP(x − x_p) as a stacked
        // least-squares problem solved by SVD.
        let s = sigma2.sqrt();
        let mut lhs = DMatrix::zeros(rows + cols, cols);
        let mut rhs = DVector::zeros(rows + cols);
        lhs.rows_mut(0, rows).copy_from(&(&a / s));
        rhs.rows_mut(0, rows).copy_from(&(&y / s));
        for i in 0..cols {
            let r = p[i].sqrt();
            lhs[(rows + i, i)] = r;
            rhs[rows + i] = r * x_p[i];
        }
        let x_ls = lhs.svd(true, true).solve(&rhs, 1e-14).unwrap();
        out.mean = out.mean.max((&post.mu - &x_ls).norm() / x_ls.norm().max(1e-300));

        let mut h = a.transpose() * &a / sigma2;
        for i in 0..cols {
            h[(i, i)] += p[i];
        }
        let resid = &post.sigma * &h - DMatrix::identity(cols, cols);
        out.covariance_residual = out.covariance_residual.max(resid.amax());

        let grad = -a.transpose() * (&y - &a * &post.mu) * (2.0 / sigma2)
            + DVector::from_fn(cols, |i, _| 2.0 * p[i] * (post.mu[i] - x_p[i]));
        out.gradient = out.gradient.max(grad.amax());

        let cfg = RvmConfig::default();
        let mut state = RvmState::new(cols, x_p.clone(), sigma2, &cfg);
        state.p = p.clone();
        state.refresh(&a, &y).unwrap();
        let (sigma_ref, mu_ref) = dense_posterior(&a, &y, &p, sigma2, &x_p);
        out.refresh = out
            .refresh
            .max((&state.mu - &mu_ref).norm() / mu_ref.norm().max(1e-300));
        for i in 0..cols {
            out.refresh = out.refresh.max(rel(state.sigma_diag[i], sigma_ref[(i, i)]));
        }
    }
    out
}

/// `log N(ỹ; Ãx_p, σ²I + ÃP⁻¹Ãᵀ)` evaluated directly.
fn gaussian_evidence(a: &DMatrix<f64>, y: &DVector<f64>, p: &[f64], sigma2: f64, x_p: &DVector<f64>) -> f64 {
    let n = y.len();
    let inv_p = DMatrix::from_diagonal(&DVector::from_iterator(p.len(), p.iter().map(|v| 1.0 / v)));
    let c = a * inv_p * a.transpose() + DMatrix::identity(n, n) * sigma2;
    let chol = c
        .clone()
        .cholesky()
        .expect("positive definite marginal covariance");
    let r = y - a * x_p;
    let logdet = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    -0.5 * (n as f64 * (2.0 * std::f64::consts::PI).ln() + logdet + r.dot(&chol.solve(&r)))
}

pub struct EvidenceGaps {
    /// Quadratic form against the posterior-mean expansion, relative.
    pub dual_form: f64,
    /// Quadratic form against a direct Gaussian density, relative.
    pub direct: f64,
}

pub fn evidence_gaps(cases: usize, seed: u64) -> EvidenceGaps {
    let mut rng = rng(seed);
    let mut out = EvidenceGaps {
        dual_form: 0.0,
        direct: 0.0,
    };
    for _ in 0..cases {
        let rows = rng.random_range(2..8usize) * 2;
        let cols = rng.random_range(2..8usize) * 2;
        let a = random_matrix(&mut rng, rows, cols);
        let y = random_vector(&mut rng, rows);
        let x_p = random_vector(&mut rng, cols);
        let p = random_positive(&mut rng, cols, 0.1, 10.0);
        let sigma2 = rng.random_range(0.1..2.0);
        let quad = log_marginal(&a, &y, &p, sigma2, &x_p).unwrap();
        let expanded = log_marginal_expanded(&a, &y, &p, sigma2, &x_p).unwrap();
        let direct = gaussian_evidence(&a, &y, &p, sigma2, &x_p);
        out.dual_form = out.dual_form.max(rel(quad, expanded));
        out.direct = out.direct.max(rel(quad, direct));
    }
    out
}

/// Largest finite-difference derivative of the evidence in `ln pₙ`
/// (unpruned components) and in `ln σ⁻²` at the fitted hyperparameters of
/// zero-mean fits on small overdetermined sparse problems.
pub fn stationarity_gap(cases: usize, seed: u64) -> f64 {
    let mut rng = rng(seed);
    let cfg = RvmConfig {
        tol: 1e-12,
        max_iters: 100_000,
        ..RvmConfig::default()
    };
    let mut worst = 0.0f64;
    let mut fitted = 0;
    while fitted < cases {
        let rows = 16;
        let cols = 8;
        let a = random_matrix(&mut rng, rows, cols);
        let mut x = DVector::zeros(cols);
        x[rng.random_range(0..cols)] = rng.random_range(1.0..2.0);
        x[rng.random_range(0..cols)] = -rng.random_range(1.0..2.0);
        let y = &a * &x + random_vector(&mut rng, rows) * 0.3;
        let zero = DVector::zeros(cols);
        let fit = run_modified_rvm(&a, &y, &zero, &cfg, 0.1).unwrap();
        if !fit.converged || fit.sigma2_opt <= cfg.sigma2_floor {
            continue;
        }
        fitted += 1;
        let ev = |p: &[f64], s2: f64| log_marginal(&a, &y, p, s2, &zero).unwrap();
        let h = 1e-5f64;
        for i in 0..cols {
            if fit.pruned[i] {
                continue;
            }
            let mut up = fit.p_opt.clone();
            let mut dn = fit.p_opt.clone();
            up[i] *= h.exp();
            dn[i] *= (-h).exp();
            let d = (ev(&up, fit.sigma2_opt) - ev(&dn, fit.sigma2_opt)) / (2.0 * h);
            worst = worst.max(d.abs());
        }
        // σ⁻² scaled by e^{±h}
        let d = (ev(&fit.p_opt, fit.sigma2_opt * (-h).exp()) - ev(&fit.p_opt, fit.sigma2_opt * h.exp()))
            / (2.0 * h);
        worst = worst.max(d.abs());
    }
    worst
}

pub struct KalmanGaps {
    /// Kalman update against the information-form conjugate posterior.
    pub conjugate: f64,
    /// Kalman update with a zero prediction and prior covariance `P⁻¹`
    /// against the static posterior mean.
    pub static_estimate: f64,
}

pub fn kalman_gaps(cases: usize, seed: u64) -> KalmanGaps {
    let mut rng = rng(seed);
    let mut out = KalmanGaps {
        conjugate: 0.0,
        static_estimate: 0.0,
    };
    for _ in 0..cases {
        let rows = rng.random_range(2..8usize) * 2;
        let cols = rng.random_range(2..8usize) * 2;
        let a = random_matrix(&mut rng, rows, cols);
        let y = random_vector(&mut rng, rows);
        let x_pred = random_vector(&mut rng, cols);
        let sigma_pred = random_spd(&mut rng, cols);
        let sigma2 = rng.random_range(0.1..2.0);

        let innovation = &y - &a * &x_pred;
        let upd = kalman_update(&x_pred, &sigma_pred, &innovation, &a, sigma2).unwrap();

        let prior_info = sigma_pred.clone().try_inverse().unwrap();
        let post_info = &prior_info + a.transpose() * &a / sigma2;
        let post_cov = post_info.try_inverse().unwrap();
        let post_mean = &post_cov * (&prior_info * &x_pred + a.transpose() * &y / sigma2);
        out.conjugate = out
            .conjugate
            .max((&upd.x_new - &post_mean).amax())
            .max((&upd.sigma_new - &post_cov).amax());

        let p = random_positive(&mut rng, cols, 0.1, 10.0);
        let prior = DMatrix::from_diagonal(&DVector::from_iterator(cols, p.iter().map(|v| 1.0 / v)));
        let zero = DVector::zeros(cols);
        let upd = kalman_update(&zero, &prior, &y, &a, sigma2).unwrap();
        let post = posterior_stats(&a, &y, &p, sigma2, &zero).unwrap();
        out.static_estimate = out.static_estimate.max((&upd.x_new - &post.mu).amax());
    }
    out
}

/// Two-sided Kolmogorov–Smirnov p-value (asymptotic) of `draws` against `cdf`.
pub fn ks_p_value(draws: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = draws.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in draws.iter().enumerate() {
        let f = cdf(x);
        d = d
            .max((f - i as f64 / n).abs())
            .max(((i + 1) as f64 / n - f).abs());
    }
    let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    let mut q = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = 2.0 * (-1.0f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
        q += term;
        if term.abs() < 1e-12 {
            break;
        }
    }
    q.clamp(0.0, 1.0)
}

/// `(mean − expected) / standard error`.
fn z_score(samples: &[f64], expected_mean: f64, expected_var: f64) -> f64 {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    (mean - expected_mean) / (expected_var / n).sqrt()
}

pub struct GibbsChecks {
    pub ks_p: f64,
    /// |empirical spike fraction − (1 − ẑ)|.
    pub spike_gap: f64,
    /// Named z-scores of sample means against the analytic moments.
    pub moments: Vec<(&'static str, f64)>,
}

impl GibbsChecks {
    pub fn max_abs_z(&self) -> f64 {
        self.moments.iter().map(|(_, z)| z.abs()).fold(0.0, f64::max)
    }
}

pub fn gibbs_checks(draws: usize, seed: u64) -> GibbsChecks {
    let mut rng = rng(seed);
    let config = GibbsConfig::default();

    // One grid angle with unit complex column: Ã is the 2×2 identity.
    let a = DMatrix::<f64>::identity(2, 2);
    let y = DVector::from_row_slice(&[0.8, -0.3]);
    let x_prev = DVector::from_element(1, C64::new(0.0, 0.0));
    let mut state = init_state(&a, &y, &x_prev, &config, &mut rng).unwrap();
    let (p, p0, z) = (1.0, 2.0, 0.5);
    state.p = vec![p, p];
    state.p0 = p0;
    state.z1 = vec![z];

    // Analytic conditional of the real component, the imaginary one held at 0.
    let p_hat = p + p0;
    let mu_hat = p0 * y[0] / p_hat;
    let slab_at_zero = (p_hat / (2.0 * std::f64::consts::PI)).sqrt() * (-0.5 * p_hat * mu_hat * mu_hat).exp();
    let spike_at_zero = (p / (2.0 * std::f64::consts::PI)).sqrt();
    let odds = z / (1.0 - z) * spike_at_zero / slab_at_zero;
    let z_hat = odds / (1.0 + odds);
    let c = conditional_signal_params(0, &state, &a, 1.0, &config);
    assert!((c.z_hat - z_hat).abs() < 1e-12 && (c.mu_hat - mu_hat).abs() < 1e-12);

    let mut slab = Vec::new();
    let mut spikes = 0usize;
    for _ in 0..draws {
        let v = sample_signal(0, &mut state, &a, 1.0, &config, &mut rng);
        if v == 0.0 {
            spikes += 1;
        } else {
            slab.push(v);
        }
    }
    let normal = Normal::new(mu_hat, p_hat.sqrt().recip()).unwrap();
    let ks_p = ks_p_value(&mut slab, |x| normal.cdf(x));
    let spike_gap = (spikes as f64 / draws as f64 - (1.0 - z_hat)).abs();

    let mut moments = Vec::new();

    // Precision with one unit neighbour: Gamma(β₁ + 1, β₂ + 1).
    let mut prev = DVector::from_element(11, C64::new(0.0, 0.0));
    prev[5] = C64::new(0.6, 0.8);
    let (shape, rate) = (config.beta[0] + 1.0, config.beta[1] + 1.0);
    let s: Vec<f64> = (0..draws)
        .map(|_| sample_precision(3, &prev, &config, &mut rng))
        .collect();
    moments.push((
        "precision, one neighbour",
        z_score(&s, shape / rate, shape / (rate * rate)),
    ));

    // Same wiring with informative hyperparameters and an empty window.
    let wired = GibbsConfig {
        beta: [3.0, 2.0, 1e-4, 1e-4, 1.0, 1.0],
        ..config.clone()
    };
    let empty = DVector::from_element(11, C64::new(0.0, 0.0));
    let s: Vec<f64> = (0..draws)
        .map(|_| sample_precision(5, &empty, &wired, &mut rng))
        .collect();
    moments.push(("precision, empty window", z_score(&s, 1.5, 3.0 / 4.0)));

    // Noise precision: Gamma(β₃ + M, β₄ + ½‖r‖²) with M = 1.
    state.x[0] = 0.0;
    let fresh = init_state(&a, &y, &x_prev, &config, &mut rng).unwrap();
    let half_r2 = 0.5 * y.norm_squared();
    let (shape, rate) = (config.beta[2] + 1.0, config.beta[3] + half_r2);
    let s: Vec<f64> = (0..draws)
        .map(|_| sample_noise_precision(&fresh, &config, &mut rng))
        .collect();
    moments.push((
        "noise precision",
        z_score(&s, shape / rate, shape / (rate * rate)),
    ));

    // Indicators: Beta(1, 1) and Beta(0.8, 1.2) at j = 5.
    let (z1, z2) = sample_indicators(draws, &config, &mut rng).unwrap();
    let beta_var = |a: f64, b: f64| a * b / ((a + b).powi(2) * (a + b + 1.0));
    moments.push(("indicator inside window", z_score(&z1, 0.5, beta_var(1.0, 1.0))));
    moments.push(("indicator outside window", z_score(&z2, 0.4, beta_var(0.8, 1.2))));

    GibbsChecks {
        ks_p,
        spike_gap,
        moments,
    }
}

pub struct ArrayGaps {
    /// max ||A_st[m, n]| − 1| and |first element − 1|.
    pub unit_modulus: f64,
    /// Largest coupling-structure violation (symmetry, Toeplitz, band, diagonal).
    pub coupling: f64,
    /// Relative error of `stack(Ax)` against `realify(A)·stack(x)`.
    pub homomorphism: f64,
    /// Whether `unstack(stack(x))` reproduced every random vector bit-exactly.
    pub round_trip_exact: bool,
}

/// Coupling structure violation for a given band specification.
pub fn coupling_violation(spec: &CouplingSpec, m: usize) -> f64 {
    let c = coupling_matrix(spec, m).unwrap();
    let bands = spec.band_values();
    let mut worst = 0.0f64;
    for i in 0..m {
        for j in 0..m {
            let lag = i.abs_diff(j);
            let expected = if lag == 0 {
                C64::new(1.0, 0.0)
            } else if lag < spec.reach {
                bands[lag - 1]
            } else {
                C64::new(0.0, 0.0)
            };
            worst = worst
                .max((c[(i, j)] - expected).norm())
                .max((c[(i, j)] - c[(j, i)]).norm());
        }
    }
    worst
}

pub fn steering_violation(m: usize, spacing: f64, theta: f64) -> f64 {
    let geom = ArrayGeometry::uniform(m, spacing).unwrap();
    let v = steering_vector(&geom, theta).unwrap();
    let mut worst = (v[0] - C64::new(1.0, 0.0)).norm();
    for z in v.iter() {
        worst = worst.max((z.norm() - 1.0).abs());
    }
    worst
}

pub fn homomorphism_gap(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> (f64, bool) {
    let a = DMatrix::from_fn(rows, cols, |_, _| {
        C64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0))
    });
    let x = DVector::from_fn(cols, |_, _| {
        C64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0))
    });
    let lhs = stack(&(&a * &x));
    let rhs = realify_matrix(&a) * stack(&x);
    let gap = (&lhs - &rhs).norm() / lhs.norm().max(1e-300);
    (gap, unstack(&stack(&x)) == x)
}

pub fn array_gaps(cases: usize, seed: u64) -> ArrayGaps {
    let mut rng = rng(seed);
    let mut out = ArrayGaps {
        unit_modulus: 0.0,
        coupling: 0.0,
        homomorphism: 0.0,
        round_trip_exact: true,
    };
    for _ in 0..cases {
        let m = rng.random_range(1..40usize);
        let spacing = rng.random_range(0.1..1.0);
        out.unit_modulus =
            out.unit_modulus
                .max(steering_violation(m, spacing, rng.random_range(0.0..=180.0)));

        let reach = rng.random_range(1..=m);
        let spec = CouplingSpec {
            reach,
            rho: (1..reach).map(|_| rng.random_range(0.0..1.0)).collect(),
            phi: (1..reach).map(|_| rng.random_range(-3.0..3.0)).collect(),
        };
        out.coupling = out.coupling.max(coupling_violation(&spec, m));

        let (rows, cols) = (rng_dim(&mut rng), rng_dim(&mut rng));
        let (gap, exact) = homomorphism_gap(&mut rng, rows, cols);
        out.homomorphism = out.homomorphism.max(gap);
        out.round_trip_exact &= exact;
    }
    let standard = ArrayConfig::standard().build().unwrap();
    out.unit_modulus = out.unit_modulus.max(grid_violation(&standard));
    out
}

fn rng_dim(rng: &mut ChaCha8Rng) -> usize {
    rng.random_range(1..12usize)
}

/// Unit modulus of every steering entry and all-ones first row.
pub fn grid_violation(grid: &SteeringGrid) -> f64 {
    let a = grid.steering();
    let mut worst = 0.0f64;
    for n in 0..a.ncols() {
        worst = worst.max((a[(0, n)] - C64::new(1.0, 0.0)).norm());
        for m in 0..a.nrows() {
            worst = worst.max((a[(m, n)].norm() - 1.0).abs());
        }
    }
    worst
}

/// z-score of the per-component noise variance of synthesized snapshots.
pub fn noise_calibration_z(sigma2: f64, snapshots: usize, seed: u64) -> f64 {
    let grid = ArrayConfig::standard().build().unwrap();
    let mut rng = rng(seed);
    let mut x = DVector::zeros(grid.len());
    x[40] = C64::new(1.0, 0.0);
    let clean = grid.effective() * &x;
    let mut sum = 0.0;
    let mut count = 0usize;
    for _ in 0..snapshots {
        let snap = synthesize_snapshot(&grid, &x, sigma2, &mut rng).unwrap();
        for (y, c) in snap.y.iter().zip(clean.iter()) {
            let n = y - c;
            sum += n.re * n.re + n.im * n.im;
            count += 2;
        }
    }
    // each squared component has variance 2σ⁴
    let mean = sum / count as f64;
    (mean - sigma2) / (2.0 * sigma2 * sigma2 / count as f64).sqrt()
}

/// `results.csv` with the runtime column removed.
pub fn results_without_runtime(dir: &Path) -> String {
    let text = std::fs::read_to_string(dir.join("results.csv")).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let skip = header.iter().position(|h| *h == "runtime_s").unwrap();
    text.lines()
        .map(|l| {
            l.split(',')
                .enumerate()
                .filter(|(i, _)| *i != skip)
                .map(|(_, f)| f)
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Runs `bench` twice with the same seed under different thread counts and
/// compares the results (runtime excluded) and per-trial estimates.
pub fn cli_runs_identical(bin: &str, scratch: &Path) -> bool {
    let run = |dir: &Path, threads: &str| {
        let status = Command::new(bin)
            .args(["bench", "--scenario", "non-endfire", "--estimator", "all"])
            .args(["--trials", "3", "--snapshots", "4", "--seed", "11", "--out"])
            .arg(dir)
            .env("RAYON_NUM_THREADS", threads)
            .output()
            .unwrap();
        assert!(
            status.status.success(),
            "{}",
            String::from_utf8_lossy(&status.stderr)
        );
    };
    let first = scratch.join("first");
    let second = scratch.join("second");
    run(&first, "1");
    run(&second, "3");
    let estimates = |d: &Path| std::fs::read(d.join("estimates.csv")).unwrap();
    results_without_runtime(&first) == results_without_runtime(&second)
        && estimates(&first) == estimates(&second)
}
