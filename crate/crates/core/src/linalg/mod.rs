//! Dense real linear algebra: storage, pivoted LU, pseudo-inverse,
//! singular-value utilities and seeded Gaussian matrices.
//!
//! Everything is `f64`. Matrices are immutable values; every operation
//! returns a fresh matrix.

mod dense;
mod lu;
mod permutation;
mod qr;
mod svd;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

pub use dense::DenseMatrix;
pub use lu::{lu_column_pivot, lu_partial_pivot, LuFactors};
pub use permutation::Permutation;
pub use qr::{pseudo_inverse, pseudo_inverse_transposed, thin_qr, ThinQr, RANK_TOLERANCE};
pub use svd::{
    numerical_rank, singular_value_tail, singular_values, spectral_norm, spectral_norm_estimate,
    squared_singular_values, DEFAULT_SPECTRAL_MAX_ITER, DEFAULT_SPECTRAL_TOL,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatrixError {
    #[error("matrix shape {rows}x{cols} is empty")]
    EmptyShape { rows: usize, cols: usize },
    #[error("data length mismatch: expected {expected}, got {got}")]
    DataLength { expected: usize, got: usize },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    DimensionMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("{op}: {reason}, got {shape:?}")]
    InvalidShape {
        op: &'static str,
        reason: &'static str,
        shape: (usize, usize),
    },
    #[error("order is not a permutation")]
    NotAPermutation,
    #[error("matrix is numerically rank deficient (min/max orthogonalized norm {ratio:e})")]
    RankDeficient { ratio: f64 },
    #[error("power iteration did not converge in {iterations} iterations (estimate {estimate})")]
    NoConvergence { estimate: f64, iterations: usize },
    #[error("{0}")]
    InvalidArgument(String),
}

/// `rows × cols` matrix of i.i.d. N(0, 1) draws from a ChaCha8 stream seeded
/// with `seed`, filled in column-major order.
pub fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data: Vec<f64> = (0..rows * cols)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    DenseMatrix::new(rows, cols, data).expect("gaussian draws are finite")
}
