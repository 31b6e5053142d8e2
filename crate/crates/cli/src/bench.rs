//! Training and classification timings normalized per MiB of signal data.

use std::time::Instant;

use anyhow::Result;
use ludict_core::dictionary::train_one;
use ludict_core::features::FeatureScheme;
use ludict_core::linalg::gaussian_matrix;
use ludict_core::seed;
use serde::Serialize;

use crate::error::invalid;

#[derive(Clone, Debug, Serialize)]
pub struct BenchRow {
    pub rows: usize,
    pub cols: usize,
    pub k: usize,
    pub data_mib: f64,
    pub train_secs: f64,
    pub classify_secs: f64,
    pub train_secs_per_mib: f64,
    pub classify_secs_per_mib: f64,
}

/// Parses `ROWSxCOLS`.
pub fn parse_shape(s: &str) -> Result<(usize, usize)> {
    let (r, c) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| invalid(format!("expected ROWSxCOLS, got {s:?}")))?;
    let p = |v: &str| {
        v.trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| invalid(format!("bad dimension {v:?} in {s:?}")))
    };
    Ok((p(r)?, p(c)?))
}

/// Times training one dictionary on a noisy rank-`k` matrix and computing
/// `dist` for all of its columns. Ranks above `min(rows, cols)` are skipped.
pub fn run(shapes: &[(usize, usize)], ranks: &[usize], root: u64) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for &(m, n) in shapes {
        for &k in ranks {
            if k == 0 || k > m.min(n) {
                continue;
            }
            let s = seed::derive_index(seed::derive_index(root, m as u64), (n * 1_000_003 + k) as u64);
            let a = gaussian_matrix(m, k, s)
                .matmul(&gaussian_matrix(k, n, s ^ 1))?
                .add(&gaussian_matrix(m, n, s ^ 2).scaled(1e-3))?;
            let data_mib = (m * n * 8) as f64 / (1024.0 * 1024.0);
            let t0 = Instant::now();
            let d = train_one("bench", &a, k, 5, s, FeatureScheme::BfdCdd)?;
            let train_secs = t0.elapsed().as_secs_f64();
            let t1 = Instant::now();
            let dist = d.distances(&a)?;
            let classify_secs = t1.elapsed().as_secs_f64();
            debug_assert_eq!(dist.len(), n);
            rows.push(BenchRow {
                rows: m,
                cols: n,
                k,
                data_mib,
                train_secs,
                classify_secs,
                train_secs_per_mib: train_secs / data_mib,
                classify_secs_per_mib: classify_secs / data_mib,
            });
        }
    }
    Ok(rows)
}

pub fn render(rows: &[BenchRow]) -> String {
    let mut out = format!(
        "{:>8} {:>8} {:>6} {:>10} {:>12} {:>12} {:>14} {:>14}\n",
        "rows", "cols", "k", "MiB", "train s", "classify s", "train s/MiB", "classify s/MiB"
    );
    for r in rows {
        out.push_str(&format!(
            "{:>8} {:>8} {:>6} {:>10.3} {:>12.5} {:>12.5} {:>14.5} {:>14.5}\n",
            r.rows,
            r.cols,
            r.k,
            r.data_mib,
            r.train_secs,
            r.classify_secs,
            r.train_secs_per_mib,
            r.classify_secs_per_mib
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_and_rows() {
        assert_eq!(parse_shape("512x100").unwrap(), (512, 100));
        assert!(parse_shape("512").is_err());
        assert!(parse_shape("0x3").is_err());
        let rows = run(&[(64, 20)], &[3, 50], 1).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].train_secs >= 0.0);
        assert!(render(&rows).contains("classify s/MiB"));
    }
}
