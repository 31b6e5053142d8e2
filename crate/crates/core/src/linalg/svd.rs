//! Singular-value utilities: power-iteration spectral norm, one-sided Jacobi
//! singular values, and numerical rank.
//!
//! The Jacobi routine is meant for desk-scale analysis (error-bound checks,
//! tests). Numerical rank of tall training matrices goes through the small
//! Gram matrix instead.

use super::dense::{dot, norm2};
use super::{gaussian_matrix, DenseMatrix, MatrixError};

pub const DEFAULT_SPECTRAL_TOL: f64 = 1e-6;
pub const DEFAULT_SPECTRAL_MAX_ITER: usize = 1000;

/// Largest singular value by power iteration on `MᵀM`.
///
/// Iteration stops once the eigen-residual `‖MᵀMv − λv‖` drops below
/// `tol·λ`. The start vector is the normalized all-ones vector, falling back
/// to a fixed-seed Gaussian vector when that lies in the null space. A zero
/// matrix has norm 0. On `NoConvergence` the error carries the best estimate,
/// which never exceeds the true norm.
pub fn spectral_norm(m: &DenseMatrix, tol: f64, max_iter: usize) -> Result<f64, MatrixError> {
    let n = m.cols();
    if m.max_abs() == 0.0 {
        return Ok(0.0);
    }
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut mv = m.matvec(&v)?;
    if norm2(&mv) <= f64::EPSILON * m.frobenius_norm() {
        let g = gaussian_matrix(n, 1, 0x5eed_5eed);
        let gn = norm2(g.column(0));
        v = g.column(0).iter().map(|x| x / gn).collect();
        mv = m.matvec(&v)?;
    }
    let mut estimate = norm2(&mv);
    for iter in 1..=max_iter {
        let w = m.tr_matvec(&mv)?;
        // Rayleigh quotient λ = vᵀMᵀMv = ‖Mv‖².
        let lambda = dot(&mv, &mv);
        estimate = estimate.max(lambda.sqrt());
        let residual = w
            .iter()
            .zip(&v)
            .map(|(wi, vi)| (wi - lambda * vi).powi(2))
            .sum::<f64>()
            .sqrt();
        if residual <= tol * lambda {
            return Ok(lambda.sqrt());
        }
        let wn = norm2(&w);
        if wn == 0.0 {
            return Ok(lambda.sqrt());
        }
        v = w.into_iter().map(|x| x / wn).collect();
        mv = m.matvec(&v)?;
        if iter == max_iter {
            estimate = estimate.max(norm2(&mv));
        }
    }
    Err(MatrixError::NoConvergence {
        estimate,
        iterations: max_iter,
    })
}

/// Spectral norm with the default tolerance, accepting the best estimate
/// when the iteration budget runs out.
pub fn spectral_norm_estimate(m: &DenseMatrix) -> f64 {
    match spectral_norm(m, DEFAULT_SPECTRAL_TOL, DEFAULT_SPECTRAL_MAX_ITER * 10) {
        Ok(v) => v,
        Err(MatrixError::NoConvergence { estimate, .. }) => estimate,
        Err(e) => unreachable!("spectral norm of a valid matrix failed: {e}"),
    }
}

/// All singular values in non-increasing order, by one-sided Jacobi
/// rotations on the taller orientation of `a`.
pub fn singular_values(a: &DenseMatrix) -> Vec<f64> {
    let mut w = if a.rows() >= a.cols() {
        a.clone()
    } else {
        a.transpose()
    };
    let n = w.cols();
    let eps = f64::EPSILON;
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = dot(w.column(p), w.column(p));
                let beta = dot(w.column(q), w.column(q));
                let gamma = dot(w.column(p), w.column(q));
                if gamma == 0.0 || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let rows = w.rows();
                let (left, right) = w.data_mut().split_at_mut(q * rows);
                let cp = &mut left[p * rows..(p + 1) * rows];
                let cq = &mut right[..rows];
                for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
                    let (xp, yq) = (*x, *y);
                    *x = c * xp - s * yq;
                    *y = s * xp + c * yq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = (0..n).map(|j| norm2(w.column(j))).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// `σ_{k+1}(A)`, i.e. the singular value at zero-based position `k`.
pub fn singular_value_tail(a: &DenseMatrix, k: usize) -> Result<f64, MatrixError> {
    let r = a.rows().min(a.cols());
    if k >= r {
        return Err(MatrixError::InvalidArgument(format!(
            "k = {k} must be below min(rows, cols) = {r}"
        )));
    }
    Ok(singular_values(a)[k])
}

/// Squared singular values of `a`, via the Gram matrix of its shorter side.
pub fn squared_singular_values(a: &DenseMatrix) -> Vec<f64> {
    let gram = if a.rows() >= a.cols() {
        a.tr_matmul(a)
    } else {
        a.matmul_tr(a)
    }
    .expect("gram of a matrix with itself");
    // Gram is symmetric PSD, so its singular values are its eigenvalues.
    singular_values(&gram)
}

/// Smallest `r` such that the leading `r` singular values carry at least
/// `energy` of `‖A‖_F²`.
pub fn numerical_rank(a: &DenseMatrix, energy: f64) -> usize {
    let s2 = squared_singular_values(a);
    let total: f64 = s2.iter().sum();
    if total == 0.0 {
        return 0;
    }
    let mut acc = 0.0;
    for (i, v) in s2.iter().enumerate() {
        acc += v;
        if acc >= energy * total {
            return i + 1;
        }
    }
    s2.len()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_norm_of_diagonal() {
        let d = DenseMatrix::from_diagonal(&[5.0, 2.0, 1.0]);
        let s = spectral_norm(&d, DEFAULT_SPECTRAL_TOL, DEFAULT_SPECTRAL_MAX_ITER).unwrap();
        assert!((s - 5.0).abs() < 1e-6);
    }

    #[test]
    fn spectral_norm_of_rank_one() {
        // u = (0, 2, 0)·, v = (3, 0, 0, 0): zero-padded outer product.
        let mut m = DenseMatrix::zeros(3, 4);
        m[(1, 0)] = 6.0;
        let s = spectral_norm(&m, DEFAULT_SPECTRAL_TOL, DEFAULT_SPECTRAL_MAX_ITER).unwrap();
        assert!((s - 6.0).abs() < 1e-6);

        let u = [1.2, -0.4, 1.6, 0.0];
        let un = norm2(&u);
        let u: Vec<f64> = u.iter().map(|x| 2.0 * x / un).collect();
        let v = [0.0, 3.0, 0.0];
        let m = DenseMatrix::from_fn(4, 3, |i, j| u[i] * v[j]);
        let s = spectral_norm(&m, DEFAULT_SPECTRAL_TOL, DEFAULT_SPECTRAL_MAX_ITER).unwrap();
        assert!((s - 6.0).abs() < 1e-6);
    }

    #[test]
    fn start_vector_in_null_space_falls_back() {
        let m = DenseMatrix::from_rows(&[[1.0, -1.0]]).unwrap();
        let s = spectral_norm(&m, DEFAULT_SPECTRAL_TOL, DEFAULT_SPECTRAL_MAX_ITER).unwrap();
        assert!((s - 2f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn zero_matrix_has_zero_norm() {
        assert_eq!(spectral_norm(&DenseMatrix::zeros(2, 3), 1e-6, 10).unwrap(), 0.0);
    }

    #[test]
    fn no_convergence_carries_estimate() {
        let m = gaussian_matrix(30, 30, 5);
        match spectral_norm(&m, 1e-15, 2) {
            Err(MatrixError::NoConvergence { estimate, iterations }) => {
                assert_eq!(iterations, 2);
                assert!(estimate > 0.0);
            }
            other => panic!("expected NoConvergence, got {other:?}"),
        }
    }

    #[test]
    fn singular_value_tail_cases() {
        let d = DenseMatrix::from_diagonal(&[3.0, 1.0, 2.0]);
        assert!((singular_value_tail(&d, 1).unwrap() - 2.0).abs() < 1e-14);
        let u = gaussian_matrix(6, 2, 1);
        let v = gaussian_matrix(2, 5, 2);
        let r2 = u.matmul(&v).unwrap();
        assert!(singular_value_tail(&r2, 2).unwrap() <= 1e-12);
        assert!(singular_value_tail(&r2, 5).is_err());
    }

    #[test]
    fn numerical_rank_of_planted_spectrum() {
        let d = DenseMatrix::from_diagonal(&[10.0, 1.0, 0.1, 0.01]);
        // 100 / 101.0101 = 0.98999 → one value short of 0.995.
        assert_eq!(numerical_rank(&d, 0.95), 1);
        assert_eq!(numerical_rank(&d, 0.995), 2);
        assert_eq!(numerical_rank(&DenseMatrix::zeros(3, 3), 0.95), 0);
    }
}
