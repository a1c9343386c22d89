//! Small dense linear-algebra helpers: extreme eigenvalues of `A^T A`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub const POWER_TOL: f64 = 1e-10;
pub const POWER_MAX_ITERS: usize = 10_000;

/// Sizes up to this use a direct symmetric eigensolve.
pub const DIRECT_EIGEN_MAX_DIM: usize = 2000;

/// Below this, `A` is treated as rank deficient.
pub const RANK_TOL: f64 = 1e-12;

/// Largest eigenvalue of a symmetric positive semidefinite matrix by power
/// iteration on the Rayleigh quotient.
pub fn power_iteration(m: &DMatrix<f64>, tol: f64, max_iters: usize) -> f64 {
    let n = m.nrows();
    if n == 0 {
        return 0.0;
    }
    // Deterministic, not orthogonal to any coordinate axis.
    let mut v = DVector::from_fn(n, |i, _| 1.0 + (i as f64 + 1.0).sqrt() * 1e-3);
    v /= v.norm();
    let mut lambda = 0.0;
    for _ in 0..max_iters {
        let w = m * &v;
        let next = v.dot(&w);
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = w / norm;
        if (next - lambda).abs() <= tol * next.abs().max(1.0) {
            return next;
        }
        lambda = next;
    }
    lambda
}

/// `‖A^T A‖` by power iteration.
pub fn gram_opnorm(a: &DMatrix<f64>) -> f64 {
    power_iteration(&a.tr_mul(a), POWER_TOL, POWER_MAX_ITERS)
}

/// `(λ_min, λ_max)` of `A^T A`.
///
/// Direct eigensolve for up to [`DIRECT_EIGEN_MAX_DIM`] columns, otherwise
/// power iteration for the top and shifted power iteration for the bottom.
pub fn gram_extreme_eigenvalues(a: &DMatrix<f64>) -> Result<(f64, f64)> {
    let gram = a.tr_mul(a);
    let (lo, hi) = if gram.nrows() <= DIRECT_EIGEN_MAX_DIM {
        let eig = SymmetricEigen::new(gram);
        let lo = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = eig
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    } else {
        let hi = power_iteration(&gram, POWER_TOL, POWER_MAX_ITERS);
        let shifted = DMatrix::identity(gram.nrows(), gram.ncols()) * hi - &gram;
        let top_shifted = power_iteration(&shifted, POWER_TOL, POWER_MAX_ITERS);
        (hi - top_shifted, hi)
    };
    if !(lo > RANK_TOL) {
        return Err(Error::RankDeficient(lo));
    }
    Ok((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn power_iteration_matches_known_spectrum() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 2.0]);
        let top = power_iteration(&m, 1e-14, 100_000);
        assert_relative_eq!(top, (3.0 + 5f64.sqrt()) / 2.0, max_relative = 1e-9);
    }

    #[test]
    fn identity_bounds() {
        let (lo, hi) = gram_extreme_eigenvalues(&DMatrix::identity(3, 3)).unwrap();
        assert_relative_eq!(lo, 1.0, epsilon = 1e-14);
        assert_relative_eq!(hi, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn rank_deficiency_is_reported() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(
            gram_extreme_eigenvalues(&a),
            Err(Error::RankDeficient(_))
        ));
    }
}
