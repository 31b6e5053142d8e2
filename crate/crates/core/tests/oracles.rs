//! Cross-checks against independent implementations: nalgebra for the
//! dense decompositions and least squares, and closed forms evaluated
//! separately for the bound formulas.

use ludict_core::dictionary::Dictionary;
use ludict_core::features::FeatureScheme;
use ludict_core::linalg::{
    gaussian_matrix, lu_partial_pivot, pseudo_inverse, singular_values, spectral_norm, DenseMatrix,
    DEFAULT_SPECTRAL_MAX_ITER,
};
use ludict_core::randomized_lu::{error_bound, rrlu_tail_bound, success_probability, BoundParameters};
use nalgebra::DMatrix;

fn to_na(m: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_column_slice(m.rows(), m.cols(), m.as_col_major())
}

#[test]
fn singular_values_match_nalgebra() {
    for (seed, (r, c)) in [(7, 5), (5, 9), (30, 30), (1, 6)].into_iter().enumerate() {
        let a = gaussian_matrix(r, c, seed as u64 + 100);
        let ours = singular_values(&a);
        let mut theirs: Vec<f64> = to_na(&a).singular_values().iter().copied().collect();
        theirs.sort_by(|x, y| y.partial_cmp(x).unwrap());
        assert_eq!(ours.len(), theirs.len());
        for (x, y) in ours.iter().zip(&theirs) {
            assert!((x - y).abs() <= 1e-10 * theirs[0], "{ours:?} vs {theirs:?}");
        }
    }
}

#[test]
fn spectral_norm_matches_largest_singular_value() {
    for seed in 0..10 {
        let a = gaussian_matrix(20, 12, seed);
        let ours = spectral_norm(&a, 1e-12, DEFAULT_SPECTRAL_MAX_ITER * 10).unwrap();
        let theirs = to_na(&a).singular_values().max();
        assert!((ours - theirs).abs() <= 1e-6 * theirs, "{ours} vs {theirs}");
    }
}

#[test]
fn pseudo_inverse_matches_nalgebra() {
    let a = gaussian_matrix(12, 5, 77);
    let ours = pseudo_inverse(&a).unwrap();
    let theirs = to_na(&a).pseudo_inverse(1e-14).unwrap();
    assert_eq!((ours.rows(), ours.cols()), theirs.shape());
    for i in 0..ours.rows() {
        for j in 0..ours.cols() {
            assert!((ours[(i, j)] - theirs[(i, j)]).abs() < 1e-12);
        }
    }
}

#[test]
fn partial_pivot_lu_matches_nalgebra_on_square_input() {
    let a = gaussian_matrix(8, 8, 5);
    let ours = lu_partial_pivot(&a).unwrap();
    let na_lu = to_na(&a).lu();
    let (l, u) = (na_lu.l(), na_lu.u());
    for i in 0..8 {
        for j in 0..8 {
            assert!((ours.lower[(i, j)] - l[(i, j)]).abs() < 1e-12);
            assert!((ours.upper[(i, j)] - u[(i, j)]).abs() < 1e-12);
        }
    }
}

/// Least-squares residual `‖D·c − x‖` with `c` from nalgebra's SVD solve.
fn lstsq_residual(d: &DenseMatrix, x: &[f64]) -> f64 {
    let dn = to_na(d);
    let xn = DMatrix::from_column_slice(x.len(), 1, x);
    let c = dn.clone().svd(true, true).solve(&xn, 1e-14).unwrap();
    (dn * c - xn).norm()
}

#[test]
fn dist_matches_least_squares_residual() {
    for seed in 0..40u64 {
        let m = 40 + (seed as usize % 5) * 7;
        let k = 1 + seed as usize % 9;
        let d = Dictionary::from_atoms("t", gaussian_matrix(m, k, seed), 0, FeatureScheme::BfdCdd).unwrap();
        let x = gaussian_matrix(m, 1, 1000 + seed);
        let ours = d.dist(x.column(0)).unwrap();
        let theirs = lstsq_residual(d.atoms(), x.column(0));
        assert!(
            (ours - theirs).abs() <= 1e-8 * theirs.max(1e-300),
            "{ours} vs {theirs}"
        );
    }
}

/// Bound evaluated term by term in a different arrangement.
fn bound_oracle(n: f64, l: f64, k: f64, sigma: f64, beta: f64, gamma: f64) -> f64 {
    let bg = beta * gamma;
    let first = 2.0 * (2.0 * n * l * bg * bg + 1.0).sqrt();
    let second = 2.0 * (2.0 * n * l).sqrt() * bg * (k * (n - k) + 1.0);
    sigma * first + sigma * second
}

#[test]
fn error_bound_matches_direct_evaluation() {
    let p = BoundParameters::default();
    for (n, l, k) in [(40, 15, 10), (150, 25, 20), (10, 10, 10), (1, 1, 1)] {
        for sigma in [0.0, 1e-3, 1.0, 42.5] {
            let ours = error_bound(n, l, k, sigma, &p).unwrap();
            let theirs = bound_oracle(n as f64, l as f64, k as f64, sigma, 5.0, 5.0);
            assert!(
                (ours - theirs).abs() <= 1e-12 * theirs.max(1.0),
                "{ours} vs {theirs}"
            );
        }
    }
    assert!((rrlu_tail_bound(40, 10, 0.5).unwrap() - 150.5).abs() < 1e-12);
}

/// Success probability evaluated in log space.
fn probability_oracle(n: f64, l: f64, k: f64, beta: f64, gamma: f64) -> f64 {
    use std::f64::consts::{E, PI};
    let t = l - k + 1.0;
    let log_a = -0.5 * (2.0 * PI * t).ln() + t * (E.ln() - (t * beta).ln());
    let g2 = gamma * gamma;
    let log_b = -(4.0 * (g2 - 1.0) * (PI * n * g2).sqrt()).ln() + n * ((2.0 * g2).ln() - (g2 - 1.0));
    1.0 - log_a.exp() - log_b.exp()
}

#[test]
fn success_probability_matches_log_space_evaluation() {
    for (n, l, k, b, g) in [
        (40, 15, 10, 5.0, 5.0),
        (100, 30, 20, 2.0, 3.0),
        (10, 6, 5, 1.0, 1.5),
        (5, 5, 1, 0.5, 2.0),
    ] {
        let p = BoundParameters::new(b, g).unwrap();
        let ours = success_probability(n, l, k, &p).unwrap();
        let theirs = probability_oracle(n as f64, l as f64, k as f64, b, g);
        assert!(
            (ours - theirs).abs() <= 1e-12 * theirs.abs().max(1.0),
            "{ours} vs {theirs}"
        );
    }
}
