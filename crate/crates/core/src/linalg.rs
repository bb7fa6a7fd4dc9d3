//! Small dense linear-algebra helpers shared by the estimators.

use nalgebra::{Cholesky, DMatrix, Dyn, SymmetricEigen};

use crate::error::{DgpError, Result};

/// Eigenvalue tolerance for positive semidefiniteness checks.
pub const PSD_TOLERANCE: f64 = 1e-10;

/// Eigenvalues below this bound are treated as a misconfigured covariance
/// rather than quadrature round-off.
pub const PSD_HARD_LIMIT: f64 = 1e-6;

const JITTER_START: f64 = 1e-12;
const JITTER_STOP: f64 = 1e-6;

/// Replaces `m` by `(m + mᵀ) / 2`.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    debug_assert_eq!(n, m.ncols());
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

pub fn is_symmetric(m: &DMatrix<f64>) -> bool {
    m.is_square() && (0..m.nrows()).all(|i| (0..i).all(|j| m[(i, j)] == m[(j, i)]))
}

/// Smallest eigenvalue of a symmetric matrix. Returns `+inf` for empty input.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return f64::INFINITY;
    }
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Errors unless every eigenvalue of the symmetric matrix `m` is at least
/// `-PSD_TOLERANCE`.
///
/// A Cholesky factorization of `m + tol·I` is attempted first; the full
/// eigendecomposition only runs when that fails.
pub fn ensure_psd(m: &DMatrix<f64>, context: &'static str) -> Result<()> {
    let mut shifted = m.clone();
    for i in 0..shifted.nrows() {
        shifted[(i, i)] += PSD_TOLERANCE;
    }
    if shifted.cholesky().is_some() {
        return Ok(());
    }
    let min_eigenvalue = min_eigenvalue(m);
    if min_eigenvalue >= -PSD_TOLERANCE {
        Ok(())
    } else {
        Err(DgpError::NotPositiveSemidefinite {
            context,
            min_eigenvalue,
        })
    }
}

/// Projects a symmetric matrix onto the PSD cone when its negative modes are
/// small.
///
/// Matrices with all eigenvalues `>= -PSD_TOLERANCE` are returned untouched.
/// Otherwise negative eigenvalues are zeroed, unless one falls below
/// `-PSD_HARD_LIMIT`, which is an error.
pub fn clip_psd(m: DMatrix<f64>, context: &'static str) -> Result<DMatrix<f64>> {
    if m.is_empty() {
        return Ok(m);
    }
    let eig = SymmetricEigen::new(m.clone());
    let min_eigenvalue = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min_eigenvalue >= -PSD_TOLERANCE {
        return Ok(m);
    }
    if min_eigenvalue < -PSD_HARD_LIMIT {
        return Err(DgpError::NotPositiveSemidefinite {
            context,
            min_eigenvalue,
        });
    }
    let clipped = eig.eigenvalues.map(|v| v.max(0.0));
    let mut out = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
    symmetrize(&mut out);
    Ok(out)
}

/// Cholesky factorization of a symmetric PSD matrix, adding diagonal jitter
/// when the plain factorization fails.
///
/// The jitter starts at `1e-12·trace/n` and grows by ×10 up to
/// `1e-6·trace/n`. Returns the factor and the jitter that was applied.
pub fn jittered_cholesky(
    m: &DMatrix<f64>,
    context: &'static str,
) -> Result<(Cholesky<f64, Dyn>, f64)> {
    if let Some(chol) = m.clone().cholesky() {
        return Ok((chol, 0.0));
    }
    let n = m.nrows();
    let scale = m.trace() / n as f64;
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(DgpError::Factorization { context });
    }
    let mut factor = JITTER_START;
    while factor <= JITTER_STOP * (1.0 + 1e-9) {
        let jitter = factor * scale;
        let mut shifted = m.clone();
        for i in 0..n {
            shifted[(i, i)] += jitter;
        }
        if let Some(chol) = shifted.cholesky() {
            return Ok((chol, jitter));
        }
        factor *= 10.0;
    }
    Err(DgpError::Factorization { context })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetrize_averages_off_diagonal() {
        let mut m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 4.0, 3.0]);
        symmetrize(&mut m);
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 3.0, 3.0]));
        assert!(is_symmetric(&m));
    }

    #[test]
    fn psd_check_accepts_singular_and_rejects_negative() {
        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(ensure_psd(&singular, "test").is_ok());
        let negative = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1e-8]);
        assert!(matches!(
            ensure_psd(&negative, "test"),
            Err(DgpError::NotPositiveSemidefinite { .. })
        ));
    }

    #[test]
    fn clip_zeroes_small_negative_modes() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1e-8]);
        let clipped = clip_psd(m, "test").unwrap();
        assert!(min_eigenvalue(&clipped) >= -1e-15);
        assert!((clipped[(0, 0)] - 1.0).abs() < 1e-15);

        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1e-3]);
        assert!(clip_psd(bad, "test").is_err());
    }

    #[test]
    fn clip_leaves_psd_input_bit_identical() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        assert_eq!(clip_psd(m.clone(), "test").unwrap(), m);
    }

    #[test]
    fn jitter_rescues_rank_deficient_matrix() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let (_, jitter) = jittered_cholesky(&m, "test").unwrap();
        assert!(jitter > 0.0 && jitter <= 1e-6);
        assert!(jittered_cholesky(&DMatrix::zeros(2, 2), "test").is_err());
    }
}
