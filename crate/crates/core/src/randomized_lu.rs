//! Rank-`k` randomized LU decomposition `P·A·Q ≈ L·U` via a Gaussian sketch,
//! plus closed-form evaluators for its error bounds.
//!
//! The procedure:
//!
//! 1. draw `G` (`n × l`) with i.i.d. N(0, 1) entries and form `Y = A·G`;
//! 2. factor `P·Y = L_y·U_y` (partial-pivot LU by default, see
//!    [`SketchFactorization`]);
//! 3. keep the first `k` columns of `L_y`;
//! 4. project `B = L_y†·P·A` (`k × n`);
//! 5. factor `B·Q = L_b·U_b` with column pivoting;
//! 6. return `L = L_y·L_b` (`m × k`) and `U = U_b` (`k × n`).
//!
//! `Q` comes only from step 5. Because `L_b` is square and invertible,
//! `P·A·Q − L·U = (L·L† − I)·P·A·Q`, so `Pᵀ·L` spans the same subspace that the
//! bound in [`error_bound`] controls.

use std::f64::consts::{E, PI};

use thiserror::Error;

use crate::linalg::{
    gaussian_matrix, lu_column_pivot, lu_partial_pivot, pseudo_inverse_transposed, spectral_norm_estimate,
    DenseMatrix, LuFactors, MatrixError, Permutation,
};

/// Default oversampling: `l = k + 5`.
pub const DEFAULT_OVERSAMPLING: usize = 5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RandomizedLuError {
    #[error("rank parameters k = {k}, l = {l} invalid for a {rows}x{cols} matrix (need 1 <= k <= l <= min(rows, cols))")]
    InvalidRank {
        k: usize,
        l: usize,
        rows: usize,
        cols: usize,
    },
    #[error("sketch has numerical rank {achieved}, below the requested k = {requested}")]
    RankCollapse { requested: usize, achieved: usize },
    #[error("invalid bound parameters: {0}")]
    InvalidBound(String),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

/// Pluggable factorization of the sketch `Y`.
///
/// Only the row permutation and the unit-lower factor feed the rest of the
/// algorithm. A rank-revealing LU can be dropped in here; the default is
/// ordinary partial pivoting.
pub trait SketchFactorization {
    fn factor(&self, y: &DenseMatrix) -> Result<LuFactors, MatrixError>;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct PartialPivotSketch;

impl SketchFactorization for PartialPivotSketch {
    fn factor(&self, y: &DenseMatrix) -> Result<LuFactors, MatrixError> {
        lu_partial_pivot(y)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RandomizedLu {
    /// `P`, acting on the rows of `A`.
    pub row_perm: Permutation,
    /// `Q`, acting on the columns of `A`.
    pub col_perm: Permutation,
    /// `m × k`, unit diagonal, lower-trapezoidal.
    pub lower: DenseMatrix,
    /// `k × n`, upper-trapezoidal.
    pub upper: DenseMatrix,
    pub k: usize,
    pub l: usize,
    pub seed: u64,
}

impl RandomizedLu {
    /// `P·A·Q − L·U`.
    pub fn residual(&self, a: &DenseMatrix) -> Result<DenseMatrix, MatrixError> {
        let paq = self.col_perm.permute_columns(&self.row_perm.permute_rows(a));
        paq.sub(&self.lower.matmul(&self.upper)?)
    }

    /// `Pᵀ·L`, the basis whose span approximates the column space of `A`.
    pub fn basis(&self) -> DenseMatrix {
        self.row_perm.unpermute_rows(&self.lower)
    }
}

/// Numerical zero for pivots of an `rows × cols` factorization whose largest
/// input entry is `scale`.
fn pivot_tolerance(rows: usize, cols: usize, scale: f64) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON * scale
}

/// Leading pivots of `f` that are numerically nonzero, up to `limit`.
fn leading_rank(f: &LuFactors, limit: usize, tol: f64) -> usize {
    (0..limit)
        .take_while(|&j| !f.zero_pivots.contains(&j) && f.upper[(j, j)].abs() > tol)
        .count()
}

/// Rank-`k` randomized LU with `l` Gaussian projections.
pub fn randomized_lu(
    a: &DenseMatrix,
    k: usize,
    l: usize,
    seed: u64,
) -> Result<RandomizedLu, RandomizedLuError> {
    randomized_lu_with(a, k, l, seed, &PartialPivotSketch)
}

pub fn randomized_lu_with<F: SketchFactorization + ?Sized>(
    a: &DenseMatrix,
    k: usize,
    l: usize,
    seed: u64,
    sketch: &F,
) -> Result<RandomizedLu, RandomizedLuError> {
    let (m, n) = a.shape();
    if k == 0 || k > l || l > m.min(n) {
        return Err(RandomizedLuError::InvalidRank {
            k,
            l,
            rows: m,
            cols: n,
        });
    }

    let g = gaussian_matrix(n, l, seed);
    let y = a.matmul(&g)?;
    let fy = sketch.factor(&y)?;
    let achieved = leading_rank(&fy, k, pivot_tolerance(m, l, y.max_abs()));
    if achieved < k {
        return Err(RandomizedLuError::RankCollapse {
            requested: k,
            achieved,
        });
    }
    let row_perm = fy.row_perm;
    let ly = fy.lower.columns_range(0..k);

    // B = L_y† · P·A, computed as ((L_y†)ᵀ)ᵀ · (P·A).
    let ly_pinv_t = pseudo_inverse_transposed(&ly)?;
    let pa = row_perm.permute_rows(a);
    let b = ly_pinv_t.tr_matmul(&pa)?;

    let fb = lu_column_pivot(&b)?;
    let achieved = leading_rank(&fb, k, pivot_tolerance(k, n, b.max_abs()));
    if achieved < k {
        return Err(RandomizedLuError::RankCollapse {
            requested: k,
            achieved,
        });
    }
    let lower = ly.matmul(&fb.lower)?;
    Ok(RandomizedLu {
        row_perm,
        col_perm: fb.col_perm,
        lower,
        upper: fb.upper,
        k,
        l,
        seed,
    })
}

/// `‖P·A·Q − L·U‖₂`.
pub fn reconstruction_error(a: &DenseMatrix, r: &RandomizedLu) -> Result<f64, RandomizedLuError> {
    Ok(spectral_norm_estimate(&r.residual(a)?))
}

/// `β` and `γ` of the probabilistic error bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundParameters {
    beta: f64,
    gamma: f64,
}

impl BoundParameters {
    pub fn new(beta: f64, gamma: f64) -> Result<Self, RandomizedLuError> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(RandomizedLuError::InvalidBound(format!(
                "beta = {beta} must be > 0"
            )));
        }
        if !(gamma > 1.0 && gamma.is_finite()) {
            return Err(RandomizedLuError::InvalidBound(format!(
                "gamma = {gamma} must be > 1"
            )));
        }
        Ok(Self { beta, gamma })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

impl Default for BoundParameters {
    /// `β = γ = 5`.
    fn default() -> Self {
        Self {
            beta: 5.0,
            gamma: 5.0,
        }
    }
}

/// Upper bound on `‖L·U − P·A·Q‖`:
///
/// `(2√(2nlβ²γ² + 1) + 2√(2nl)·βγ·(k(n−k) + 1))·σ_{k+1}`.
pub fn error_bound(
    n: usize,
    l: usize,
    k: usize,
    sigma_k1: f64,
    p: &BoundParameters,
) -> Result<f64, RandomizedLuError> {
    if !(n >= l && l >= k && k >= 1) {
        return Err(RandomizedLuError::InvalidBound(format!(
            "need n >= l >= k >= 1, got n = {n}, l = {l}, k = {k}"
        )));
    }
    if !(sigma_k1 >= 0.0) {
        return Err(RandomizedLuError::InvalidBound(format!(
            "sigma_(k+1) = {sigma_k1} must be >= 0"
        )));
    }
    let (n, l, k) = (n as f64, l as f64, k as f64);
    let bg = p.beta * p.gamma;
    let first = 2.0 * (2.0 * n * l * bg * bg + 1.0).sqrt();
    let second = 2.0 * (2.0 * n * l).sqrt() * bg * (k * (n - k) + 1.0);
    Ok((first + second) * sigma_k1)
}

/// Lower bound on the probability that [`error_bound`] holds:
///
/// `1 − (2π(l−k+1))^{-1/2}·(e/((l−k+1)β))^{l−k+1}
///    − (4(γ²−1)√(πnγ²))^{-1}·(2γ²/e^{γ²−1})^n`.
///
/// Weak parameters can push the value to or below zero; it is returned
/// unclamped.
pub fn success_probability(
    n: usize,
    l: usize,
    k: usize,
    p: &BoundParameters,
) -> Result<f64, RandomizedLuError> {
    if l < k || n == 0 {
        return Err(RandomizedLuError::InvalidBound(format!(
            "need l >= k and n >= 1, got n = {n}, l = {l}, k = {k}"
        )));
    }
    let t = (l - k + 1) as f64;
    let (beta, gamma) = (p.beta, p.gamma);
    let g2 = gamma * gamma;
    let sketch_term = (2.0 * PI * t).sqrt().recip() * (E / (t * beta)).powf(t);
    let gaussian_norm_term = (4.0 * (g2 - 1.0) * (PI * n as f64 * g2).sqrt()).recip()
        * (2.0 * g2 / (g2 - 1.0).exp()).powf(n as f64);
    Ok(1.0 - sketch_term - gaussian_norm_term)
}

/// `(k(n−k) + 1)·σ_{k+1}`: the error of truncating a rank-revealing LU to
/// rank `k`.
pub fn rrlu_tail_bound(n: usize, k: usize, sigma_k1: f64) -> Result<f64, RandomizedLuError> {
    if !(k >= 1 && k < n) {
        return Err(RandomizedLuError::InvalidBound(format!(
            "need 1 <= k < n, got n = {n}, k = {k}"
        )));
    }
    Ok(((k * (n - k) + 1) as f64) * sigma_k1)
}
