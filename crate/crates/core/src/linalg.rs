//! Small dense linear-algebra helpers shared by the estimators.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Jitter ladder for symmetric positive-definite factorizations, relative to
/// the mean diagonal magnitude.
const JITTER_LADDER: [f64; 7] = [0.0, 1e-12, 1e-11, 1e-10, 1e-9, 1e-8, 1e-6];

/// Cholesky factorization that retries with growing diagonal jitter.
pub fn cholesky_jittered(a: &DMatrix<f64>, what: &str) -> Result<Cholesky<f64, Dyn>> {
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension(format!(
            "{what}: expected a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("{what}: non-finite entry")));
    }
    let n = a.nrows();
    let scale = if n == 0 {
        1.0
    } else {
        (a.diagonal().iter().map(|d| d.abs()).sum::<f64>() / n as f64).max(f64::MIN_POSITIVE)
    };
    for jitter in JITTER_LADDER {
        let mut m = a.clone();
        if jitter > 0.0 {
            for i in 0..n {
                m[(i, i)] += jitter * scale;
            }
        }
        if let Some(chol) = Cholesky::new(m) {
            return Ok(chol);
        }
    }
    Err(Error::Numerical(format!(
        "{what}: matrix is not positive definite after jitter escalation"
    )))
}

/// Solves `a x = b` for symmetric positive-definite `a`.
pub fn spd_solve(a: &DMatrix<f64>, b: &DVector<f64>, what: &str) -> Result<DVector<f64>> {
    Ok(cholesky_jittered(a, what)?.solve(b))
}

/// Log-determinant from a Cholesky factor.
pub fn chol_logdet(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

/// Replaces `m` with `(m + mᵀ) / 2`.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// `a · diag(d) · aᵀ` without materializing the diagonal matrix.
pub fn weighted_gram(a: &DMatrix<f64>, d: &[f64]) -> DMatrix<f64> {
    let mut scaled = a.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= d[j];
    }
    &scaled * a.transpose()
}
