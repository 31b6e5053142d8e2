use super::dense::{dot, norm2};
use super::{DenseMatrix, MatrixError};

/// Columns whose orthogonalized norm falls below this fraction of the
/// largest are treated as linearly dependent.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// Thin Householder QR of a tall matrix: `M = Q·R` with `Q` `m × k`
/// orthonormal and `R` `k × k` upper triangular.
#[derive(Clone, Debug)]
pub struct ThinQr {
    pub q: DenseMatrix,
    pub r: DenseMatrix,
}

impl ThinQr {
    /// Ratio `min |R_jj| / max |R_jj|`.
    pub fn diagonal_ratio(&self) -> f64 {
        let k = self.r.cols();
        let diag: Vec<f64> = (0..k).map(|j| self.r[(j, j)].abs()).collect();
        let max = diag.iter().cloned().fold(0.0, f64::max);
        let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
        if max == 0.0 {
            0.0
        } else {
            min / max
        }
    }
}

pub fn thin_qr(m: &DenseMatrix) -> Result<ThinQr, MatrixError> {
    let (rows, k) = m.shape();
    if rows < k {
        return Err(MatrixError::InvalidShape {
            op: "thin_qr",
            reason: "requires rows >= cols",
            shape: (rows, k),
        });
    }
    let mut w = m.clone();
    // Householder vectors v_j (stored with v_j[j] explicit) and their betas.
    let mut betas = vec![0.0; k];
    let mut r = DenseMatrix::zeros(k, k);

    for j in 0..k {
        let alpha = {
            let x = &w.column(j)[j..];
            let nrm = norm2(x);
            if x[0] >= 0.0 {
                -nrm
            } else {
                nrm
            }
        };
        if alpha == 0.0 {
            betas[j] = 0.0;
            r[(j, j)] = 0.0;
            for i in 0..j {
                r[(i, j)] = w[(i, j)];
            }
            continue;
        }
        {
            let col = w.column_mut(j);
            col[j] -= alpha;
        }
        let vnorm2 = {
            let v = &w.column(j)[j..];
            dot(v, v)
        };
        let beta = if vnorm2 == 0.0 { 0.0 } else { 2.0 / vnorm2 };
        betas[j] = beta;
        for i in 0..j {
            r[(i, j)] = w[(i, j)];
        }
        r[(j, j)] = alpha;
        // Apply H_j = I − β v vᵀ to the trailing columns.
        let v: Vec<f64> = w.column(j)[j..].to_vec();
        for c in (j + 1)..k {
            let col = &mut w.column_mut(c)[j..];
            let s = beta * dot(&v, col);
            if s != 0.0 {
                for (x, &vi) in col.iter_mut().zip(&v) {
                    *x -= s * vi;
                }
            }
        }
    }

    // Accumulate Q = H_0 ⋯ H_{k-1} [I_k; 0] backwards.
    let mut q = DenseMatrix::zeros(rows, k);
    for j in 0..k {
        q[(j, j)] = 1.0;
    }
    for j in (0..k).rev() {
        let beta = betas[j];
        if beta == 0.0 {
            continue;
        }
        let v = &w.column(j)[j..];
        for c in j..k {
            let col = &mut q.column_mut(c)[j..];
            let s = beta * dot(v, col);
            if s != 0.0 {
                for (x, &vi) in col.iter_mut().zip(v) {
                    *x -= s * vi;
                }
            }
        }
    }
    Ok(ThinQr { q, r })
}

/// Moore–Penrose pseudo-inverse of a full-column-rank `m × k` matrix
/// (`m ≥ k`), returned as the `k × m` matrix `R⁻¹·Qᵀ`.
pub fn pseudo_inverse(m: &DenseMatrix) -> Result<DenseMatrix, MatrixError> {
    Ok(pseudo_inverse_transposed(m)?.transpose())
}

/// `(M†)ᵀ = Q·R⁻ᵀ` as an `m × k` matrix. Cheaper to apply through
/// transposed products than the `k × m` form when `m` is large.
pub fn pseudo_inverse_transposed(m: &DenseMatrix) -> Result<DenseMatrix, MatrixError> {
    let qr = thin_qr(m)?;
    let ratio = qr.diagonal_ratio();
    if !(ratio >= RANK_TOLERANCE) {
        return Err(MatrixError::RankDeficient { ratio });
    }
    let k = m.cols();
    // Solve X·Rᵀ = Q column by column, last column first.
    let rows = m.rows();
    let mut x = qr.q;
    for j in (0..k).rev() {
        let (left, right) = x.data_mut().split_at_mut((j + 1) * rows);
        let xj = &mut left[j * rows..];
        for i in (j + 1)..k {
            let rji = qr.r[(j, i)];
            if rji == 0.0 {
                continue;
            }
            let xi = &right[(i - j - 1) * rows..(i - j) * rows];
            for (t, &s) in xj.iter_mut().zip(xi) {
                *t -= rji * s;
            }
        }
        let rjj = qr.r[(j, j)];
        for t in xj.iter_mut() {
            *t /= rjj;
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::gaussian_matrix;

    #[test]
    fn qr_reconstructs_and_is_orthonormal() {
        let a = gaussian_matrix(9, 4, 3);
        let qr = thin_qr(&a).unwrap();
        let back = qr.q.matmul(&qr.r).unwrap();
        assert!(back.sub(&a).unwrap().max_abs() < 1e-13);
        let qtq = qr.q.tr_matmul(&qr.q).unwrap();
        assert!(qtq.sub(&DenseMatrix::identity(4)).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn pinv_of_identity_is_identity() {
        let p = pseudo_inverse(&DenseMatrix::identity(3)).unwrap();
        assert!(p.sub(&DenseMatrix::identity(3)).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn pinv_of_column_vector() {
        let v = DenseMatrix::from_rows(&[[3.0], [4.0]]).unwrap();
        let p = pseudo_inverse(&v).unwrap();
        assert_eq!(p.shape(), (1, 2));
        assert!((p[(0, 0)] - 3.0 / 25.0).abs() < 1e-15);
        assert!((p[(0, 1)] - 4.0 / 25.0).abs() < 1e-15);
    }

    #[test]
    fn moore_penrose_conditions() {
        let m = gaussian_matrix(6, 3, 21);
        let p = pseudo_inverse(&m).unwrap();
        let mpm = m.matmul(&p).unwrap().matmul(&m).unwrap();
        assert!(mpm.sub(&m).unwrap().frobenius_norm() < 1e-9);
        let pmp = p.matmul(&m).unwrap().matmul(&p).unwrap();
        assert!(pmp.sub(&p).unwrap().frobenius_norm() < 1e-9);
        let pm = p.matmul(&m).unwrap();
        assert!(pm.sub(&DenseMatrix::identity(3)).unwrap().frobenius_norm() < 1e-8);
        let mp = m.matmul(&p).unwrap();
        assert!(mp.sub(&mp.transpose()).unwrap().frobenius_norm() < 1e-12);
    }

    #[test]
    fn rank_deficient_is_reported() {
        let m = DenseMatrix::from_rows(&[[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]]).unwrap();
        assert!(matches!(
            pseudo_inverse(&m),
            Err(MatrixError::RankDeficient { .. })
        ));
        let z = DenseMatrix::zeros(3, 2);
        assert!(matches!(
            pseudo_inverse(&z),
            Err(MatrixError::RankDeficient { .. })
        ));
    }
}
