use super::{DenseMatrix, MatrixError};

/// A permutation of `0..n`, used for both row (`P`) and column (`Q`)
/// pivoting.
///
/// As a row permutation, `(P·A)[i, :] = A[order[i], :]`. As a column
/// permutation, `(A·Q)[:, j] = A[:, order[j]]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Permutation {
    order: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Self {
            order: (0..n).collect(),
        }
    }

    pub fn from_order(order: Vec<usize>) -> Result<Self, MatrixError> {
        let mut seen = vec![false; order.len()];
        for &i in &order {
            if i >= order.len() || seen[i] {
                return Err(MatrixError::NotAPermutation);
            }
            seen[i] = true;
        }
        Ok(Self { order })
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.order.iter().enumerate().all(|(i, &o)| i == o)
    }

    pub(crate) fn swap(&mut self, a: usize, b: usize) {
        self.order.swap(a, b);
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.order.len()];
        for (i, &o) in self.order.iter().enumerate() {
            inv[o] = i;
        }
        Self { order: inv }
    }

    /// `P · a`.
    pub fn permute_rows(&self, a: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.len(), a.rows(), "row permutation size mismatch");
        DenseMatrix::from_fn(a.rows(), a.cols(), |i, j| a[(self.order[i], j)])
    }

    /// `Pᵀ · a`, i.e. undoes [`Permutation::permute_rows`].
    pub fn unpermute_rows(&self, a: &DenseMatrix) -> DenseMatrix {
        self.inverse().permute_rows(a)
    }

    /// `a · Q`.
    pub fn permute_columns(&self, a: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.len(), a.cols(), "column permutation size mismatch");
        a.select_columns(&self.order)
    }

    /// Permutation matrix `P` with `P[i, order[i]] = 1`.
    pub fn to_matrix(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.len(), self.len());
        for (i, &o) in self.order.iter().enumerate() {
            m[(i, o)] = 1.0;
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates_bijection() {
        assert!(Permutation::from_order(vec![2, 0, 1]).is_ok());
        assert!(Permutation::from_order(vec![0, 0, 1]).is_err());
        assert!(Permutation::from_order(vec![0, 3]).is_err());
    }

    #[test]
    fn matrix_form_matches_row_and_column_action() {
        let p = Permutation::from_order(vec![2, 0, 3, 1]).unwrap();
        let a = DenseMatrix::from_fn(4, 3, |i, j| (i * 7 + j * 3) as f64);
        let pa = p.to_matrix().matmul(&a).unwrap();
        assert_eq!(p.permute_rows(&a), pa);
        let b = a.transpose();
        let bq = b.matmul(&p.to_matrix().transpose()).unwrap();
        assert_eq!(p.permute_columns(&b), bq);
        assert_eq!(p.unpermute_rows(&p.permute_rows(&a)), a);
        assert!(p.inverse().inverse() == p);
    }
}
