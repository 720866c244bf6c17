use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{Error, Result};

/// Largest diagonal shift tried before a factorization is declared failed.
pub(crate) const MAX_JITTER: f64 = 1e-6;
const MIN_ESCALATED_JITTER: f64 = 1e-14;

/// Cholesky factorization of `mat + jitter·I`, retrying with the jitter
/// multiplied by ten until it exceeds [`MAX_JITTER`].
pub(crate) fn cholesky_with_jitter(
    mat: &DMatrix<f64>,
    base_jitter: f64,
    what: &str,
) -> Result<Cholesky<f64, Dyn>> {
    let mut jitter = base_jitter;
    loop {
        let mut shifted = mat.clone();
        if jitter > 0.0 {
            add_to_diagonal(&mut shifted, jitter);
        }
        if let Some(chol) = Cholesky::new(shifted) {
            if chol
                .l_dirty()
                .diagonal()
                .iter()
                .all(|v| v.is_finite() && *v > 0.0)
            {
                if jitter > base_jitter {
                    log::debug!("{what}: factorized after raising jitter to {jitter:e}");
                }
                return Ok(chol);
            }
        }
        if jitter >= MAX_JITTER {
            return Err(Error::Numerical(format!(
                "{what}: Cholesky factorization failed with jitter up to {MAX_JITTER:e}"
            )));
        }
        jitter = (jitter * 10.0).clamp(MIN_ESCALATED_JITTER, MAX_JITTER);
    }
}

/// Inverse of an SPD matrix via [`cholesky_with_jitter`], symmetrized.
pub(crate) fn spd_inverse(
    mat: &DMatrix<f64>,
    base_jitter: f64,
    what: &str,
) -> Result<DMatrix<f64>> {
    let inv = cholesky_with_jitter(mat, base_jitter, what)?.inverse();
    Ok(symmetrize(&inv))
}

pub(crate) fn add_to_diagonal(mat: &mut DMatrix<f64>, value: f64) {
    for i in 0..mat.nrows().min(mat.ncols()) {
        mat[(i, i)] += value;
    }
}

pub(crate) fn symmetrize(mat: &DMatrix<f64>) -> DMatrix<f64> {
    (mat + mat.transpose()) * 0.5
}

/// `tr(A B)` for square matrices of equal size, without forming the product.
pub(crate) fn trace_of_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.component_mul(&b.transpose()).sum()
}

/// True when a plain Cholesky factorization (no jitter) succeeds.
pub fn is_positive_definite(mat: &DMatrix<f64>) -> bool {
    mat.is_square()
        && Cholesky::new(mat.clone())
            .map(|c| {
                c.l_dirty()
                    .diagonal()
                    .iter()
                    .all(|v| v.is_finite() && *v > 0.0)
            })
            .unwrap_or(false)
}
