//! Seeded inputs shared by the benchmarks.

use ludict_core::linalg::{gaussian_matrix, DenseMatrix};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Rank-`k` `m × n` matrix plus Gaussian noise of size `noise`.
pub fn noisy_low_rank(m: usize, n: usize, k: usize, noise: f64, seed: u64) -> DenseMatrix {
    gaussian_matrix(m, k, seed)
        .matmul(&gaussian_matrix(k, n, seed ^ 1))
        .expect("inner dimensions agree")
        .add(&gaussian_matrix(m, n, seed ^ 2).scaled(noise))
        .expect("shapes agree")
}

pub fn random_bytes(len: usize, seed: u64) -> Vec<u8> {
    let mut buf = vec![0u8; len];
    ChaCha8Rng::seed_from_u64(seed).fill_bytes(&mut buf);
    buf
}
