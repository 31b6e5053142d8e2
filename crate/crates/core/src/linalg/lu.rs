//! Pivoted LU factorizations.
//!
//! Neither routine aborts on an exactly zero pivot. The step is skipped, its
//! index is recorded in [`LuFactors::zero_pivots`] and the caller decides how
//! to treat the resulting rank deficiency.

use super::{DenseMatrix, MatrixError, Permutation};

#[derive(Clone, Debug)]
pub struct LuFactors {
    /// `m × r`, unit diagonal, lower-trapezoidal.
    pub lower: DenseMatrix,
    /// `r × n`, upper-trapezoidal.
    pub upper: DenseMatrix,
    pub row_perm: Permutation,
    /// Identity unless the factorization pivots on columns.
    pub col_perm: Permutation,
    /// Elimination steps whose pivot candidates were all exactly zero.
    pub zero_pivots: Vec<usize>,
}

impl LuFactors {
    pub fn is_exactly_singular(&self) -> bool {
        !self.zero_pivots.is_empty()
    }

    /// `P·A·Q − L·U`.
    pub fn residual(&self, a: &DenseMatrix) -> Result<DenseMatrix, MatrixError> {
        let paq = self.col_perm.permute_columns(&self.row_perm.permute_rows(a));
        paq.sub(&self.lower.matmul(&self.upper)?)
    }
}

/// `P·A = L·U` with max-magnitude partial pivoting on rows.
///
/// Requires `rows ≥ cols`; `L` is `m × n` and `U` is `n × n`.
pub fn lu_partial_pivot(a: &DenseMatrix) -> Result<LuFactors, MatrixError> {
    let (m, n) = a.shape();
    if m < n {
        return Err(MatrixError::InvalidShape {
            op: "lu_partial_pivot",
            reason: "requires rows >= cols",
            shape: (m, n),
        });
    }
    let mut w = a.clone();
    let mut perm = Permutation::identity(m);
    let mut zero_pivots = Vec::new();

    for j in 0..n {
        let col = w.column(j);
        let (p, pmax) = col[j..].iter().enumerate().fold((j, 0.0f64), |(bi, bv), (i, v)| {
            if v.abs() > bv {
                (j + i, v.abs())
            } else {
                (bi, bv)
            }
        });
        if pmax == 0.0 {
            zero_pivots.push(j);
            continue;
        }
        if p != j {
            w.swap_rows(p, j);
            perm.swap(p, j);
        }
        let pivot = w[(j, j)];
        for v in &mut w.column_mut(j)[j + 1..] {
            *v /= pivot;
        }
        // Trailing update, column by column.
        let (done, rest) = split_columns(&mut w, j);
        let mult = &done[j + 1..];
        for c in 0..(n - j - 1) {
            let col = &mut rest[c * m..(c + 1) * m];
            let ujc = col[j];
            if ujc == 0.0 {
                continue;
            }
            for (x, &l) in col[j + 1..].iter_mut().zip(mult) {
                *x -= l * ujc;
            }
        }
    }

    let lower = DenseMatrix::from_fn(m, n, |i, j| match i.cmp(&j) {
        std::cmp::Ordering::Greater => w[(i, j)],
        std::cmp::Ordering::Equal => 1.0,
        std::cmp::Ordering::Less => 0.0,
    });
    let upper = DenseMatrix::from_fn(n, n, |i, j| if i <= j { w[(i, j)] } else { 0.0 });
    Ok(LuFactors {
        lower,
        upper,
        row_perm: perm,
        col_perm: Permutation::identity(n),
        zero_pivots,
    })
}

/// Column `j` of `w` and all columns after it, as disjoint slices.
fn split_columns(w: &mut DenseMatrix, j: usize) -> (&[f64], &mut [f64]) {
    let m = w.rows();
    let (left, right) = w.data_mut().split_at_mut((j + 1) * m);
    (&left[j * m..], right)
}

/// `B·Q = L·U` with column pivoting: at step `i` the pivot is the
/// max-magnitude entry of active row `i` among the remaining columns.
///
/// Requires `rows ≤ cols`; `L` is `k × k` and `U` is `k × n`.
pub fn lu_column_pivot(b: &DenseMatrix) -> Result<LuFactors, MatrixError> {
    let (k, n) = b.shape();
    if k > n {
        return Err(MatrixError::InvalidShape {
            op: "lu_column_pivot",
            reason: "requires rows <= cols",
            shape: (k, n),
        });
    }
    let mut w = b.clone();
    let mut perm = Permutation::identity(n);
    let mut zero_pivots = Vec::new();

    for i in 0..k {
        let mut p = i;
        let mut pmax = 0.0f64;
        for j in i..n {
            let v = w[(i, j)].abs();
            if v > pmax {
                pmax = v;
                p = j;
            }
        }
        if pmax == 0.0 {
            zero_pivots.push(i);
            continue;
        }
        if p != i {
            w.swap_columns(p, i);
            perm.swap(p, i);
        }
        let pivot = w[(i, i)];
        for v in &mut w.column_mut(i)[i + 1..] {
            *v /= pivot;
        }
        let mult: Vec<f64> = w.column(i)[i + 1..].to_vec();
        for c in (i + 1)..n {
            let col = w.column_mut(c);
            let uic = col[i];
            if uic == 0.0 {
                continue;
            }
            for (x, &l) in col[i + 1..].iter_mut().zip(&mult) {
                *x -= l * uic;
            }
        }
    }

    let lower = DenseMatrix::from_fn(k, k, |r, c| match r.cmp(&c) {
        std::cmp::Ordering::Greater => w[(r, c)],
        std::cmp::Ordering::Equal => 1.0,
        std::cmp::Ordering::Less => 0.0,
    });
    let upper = DenseMatrix::from_fn(k, n, |r, c| if r <= c { w[(r, c)] } else { 0.0 });
    Ok(LuFactors {
        lower,
        upper,
        row_perm: Permutation::identity(k),
        col_perm: perm,
        zero_pivots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::gaussian_matrix;

    fn rel_residual(f: &LuFactors, a: &DenseMatrix) -> f64 {
        f.residual(a).unwrap().frobenius_norm() / a.frobenius_norm()
    }

    #[test]
    fn identity_factors_trivially() {
        let f = lu_partial_pivot(&DenseMatrix::identity(3)).unwrap();
        assert_eq!(f.lower, DenseMatrix::identity(3));
        assert_eq!(f.upper, DenseMatrix::identity(3));
        assert!(f.row_perm.is_identity());
        assert!(!f.is_exactly_singular());

        let g = lu_column_pivot(&DenseMatrix::identity(2)).unwrap();
        assert!(g.col_perm.is_identity());
        assert_eq!(g.lower, DenseMatrix::identity(2));
        assert_eq!(g.upper, DenseMatrix::identity(2));
    }

    #[test]
    fn forced_row_swap() {
        let a = DenseMatrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let f = lu_partial_pivot(&a).unwrap();
        assert_eq!(f.row_perm.order(), &[1, 0]);
        assert_eq!(f.lower, DenseMatrix::identity(2));
        assert_eq!(f.upper, DenseMatrix::identity(2));
    }

    #[test]
    fn forced_column_swap() {
        let b = DenseMatrix::from_rows(&[[0.0, 2.0]]).unwrap();
        let f = lu_column_pivot(&b).unwrap();
        assert_eq!(f.col_perm.order(), &[1, 0]);
        assert_eq!(f.upper.row(0), vec![2.0, 0.0]);

        // Second row is empty: the second step is a flagged zero pivot.
        let b2 = DenseMatrix::from_rows(&[[0.0, 2.0], [0.0, 0.0]]).unwrap();
        let f2 = lu_column_pivot(&b2).unwrap();
        assert_eq!(f2.col_perm.order(), &[1, 0]);
        assert_eq!(f2.zero_pivots, vec![1]);
        assert!(rel_residual(&f2, &b2) == 0.0);
    }

    #[test]
    fn zero_column_is_flagged_not_fatal() {
        let a = DenseMatrix::from_rows(&[[1.0, 0.0, 2.0], [3.0, 0.0, 1.0], [4.0, 0.0, 5.0]]).unwrap();
        let f = lu_partial_pivot(&a).unwrap();
        assert_eq!(f.zero_pivots, vec![1]);
        assert!(rel_residual(&f, &a) < 1e-15);
    }

    #[test]
    fn random_reconstruction() {
        let a = gaussian_matrix(8, 5, 11);
        let f = lu_partial_pivot(&a).unwrap();
        assert!(rel_residual(&f, &a) <= 1e-12);
        let b = gaussian_matrix(4, 9, 12);
        let g = lu_column_pivot(&b).unwrap();
        assert_eq!(g.lower.shape(), (4, 4));
        assert_eq!(g.upper.shape(), (4, 9));
        assert!(rel_residual(&g, &b) <= 1e-12);
    }

    #[test]
    fn shape_preconditions() {
        assert!(lu_partial_pivot(&DenseMatrix::zeros(2, 3)).is_err());
        assert!(lu_column_pivot(&DenseMatrix::zeros(3, 2)).is_err());
    }
}
