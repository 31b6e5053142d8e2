//! End-to-end acceptance suite. Every criterion prints one PASS/FAIL line
//! and the test fails if any criterion does.
//!
//! Run with `cargo test -p ludict-cli --test acceptance -- --nocapture`
//! to see the lines of a passing run.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::{Duration, Instant};

use anyhow::{ensure, Result};
use ludict_cli::manifest::Split;
use ludict_cli::pipeline::{
    classify_manifest, manifest_inputs, scan_inputs, summarize_scan, train_manifest, Extraction, FileReport,
    SizeSpec, TrainSettings,
};
use ludict_cli::synth::{
    generate_container_corpus, generate_corpus, ContainerCorpusSpec, SyntheticSourceSpec, PAYLOAD_LABEL,
};
use ludict_core::archive::{decode_bundle, encode_bundle};
use ludict_core::dictionary::{train_one, Dictionary};
use ludict_core::features::{bfd_cdd, dbfd, markov_walk, FeatureScheme};
use ludict_core::linalg::{gaussian_matrix, thin_qr, DenseMatrix};
use ludict_core::randomized_lu::{
    error_bound, randomized_lu, reconstruction_error, success_probability, BoundParameters,
};
use ludict_core::sizing::{
    error_matrices, find_optimal_agreement, ErrorMatrix, LabeledSignals, SizingConfig,
};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FRAGMENT_CORPUS_SEED: u64 = 11;
const CONTAINER_CORPUS_SEED: u64 = 7;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Result<Outcome> {
    Ok(Outcome {
        pass,
        detail: detail.into(),
    })
}

fn to_na(a: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_column_slice(a.rows(), a.cols(), a.as_col_major())
}

fn na_singular_values(a: &DenseMatrix) -> Vec<f64> {
    let mut s: Vec<f64> = to_na(a).singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

fn na_spectral_norm(a: &DenseMatrix) -> f64 {
    na_singular_values(a).first().copied().unwrap_or(0.0)
}

/// `m × n` matrix with singular values `decay^i`.
fn geometric_spectrum(m: usize, n: usize, decay: f64, seed: u64) -> DenseMatrix {
    let r = m.min(n);
    let u = thin_qr(&gaussian_matrix(m, r, seed)).unwrap().q;
    let v = thin_qr(&gaussian_matrix(n, r, seed ^ 0x9e37)).unwrap().q;
    let s = DenseMatrix::from_diagonal(&(0..r).map(|i| decay.powi(i as i32)).collect::<Vec<_>>());
    u.matmul(&s).unwrap().matmul_tr(&v).unwrap()
}

fn factorization_exactness() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for t in 0..50u64 {
        let m = rng.random_range(20..=200);
        let n = rng.random_range(20..=150);
        let k = rng.random_range(1..=20.min(m).min(n));
        let a = gaussian_matrix(m, k, 2 * t).matmul(&gaussian_matrix(k, n, 2 * t + 1))?;
        let f = randomized_lu(&a, k, (k + 5).min(m).min(n), 500 + t)?;
        let rel = reconstruction_error(&a, &f)? / na_spectral_norm(&a);
        worst = worst.max(rel);
    }
    outcome(
        worst <= 1e-9,
        format!("worst relative error {worst:.2e} (limit 1e-9)"),
    )
}

const BOUND_TRIALS: u64 = 200;
const BOUND_SHAPE: (usize, usize, usize, usize) = (50, 40, 10, 15);

fn required_fraction() -> Result<f64> {
    let (_, n, k, l) = BOUND_SHAPE;
    Ok(success_probability(n, l, k, &BoundParameters::default())?.max(0.0))
}

fn factorization_bound() -> Result<Outcome> {
    let (m, n, k, l) = BOUND_SHAPE;
    let p = BoundParameters::default();
    let mut ok = 0;
    for t in 0..BOUND_TRIALS {
        let a = geometric_spectrum(m, n, 0.7, 2000 + t);
        let sigma = na_singular_values(&a)[k];
        let f = randomized_lu(&a, k, l, 9000 + t)?;
        if na_spectral_norm(&f.residual(&a)?) <= error_bound(n, l, k, sigma, &p)? {
            ok += 1;
        }
    }
    let need = required_fraction()?;
    let frac = ok as f64 / BOUND_TRIALS as f64;
    outcome(
        frac >= need,
        format!("{ok}/{BOUND_TRIALS} within bound, need fraction >= {need:.9}"),
    )
}

fn projection_bound() -> Result<Outcome> {
    let (m, n, k, l) = BOUND_SHAPE;
    let p = BoundParameters::default();
    let mut ok = 0;
    for t in 0..BOUND_TRIALS {
        let a = geometric_spectrum(m, n, 0.7, 2000 + t);
        let sigma = na_singular_values(&a)[k];
        let d = train_one("a", &a, k, l - k, 9000 + t, FeatureScheme::BfdCdd)?;
        let residual = d.projector_matrix().matmul(&a)?.sub(&a)?;
        if na_spectral_norm(&residual) <= error_bound(n, l, k, sigma, &p)? {
            ok += 1;
        }
    }
    let need = required_fraction()?;
    let frac = ok as f64 / BOUND_TRIALS as f64;
    outcome(
        frac >= need,
        format!("{ok}/{BOUND_TRIALS} within bound, need fraction >= {need:.9}"),
    )
}

fn feature_fixtures() -> Result<Outcome> {
    let pair = |a: u8, b: u8| (a as usize) << 8 | b as usize;
    let expected = [
        (
            "BFD AABCCCDR",
            bfd_cdd(b"AABCCCDR")?.values[..256].to_vec(),
            vec![(65, 0.25), (66, 0.125), (67, 0.375), (68, 0.125), (82, 0.125)],
        ),
        (
            "CDD AABCCCDFG",
            bfd_cdd(b"AABCCCDFG")?.values[256..].to_vec(),
            vec![(0, 3.0 / 8.0), (1, 4.0 / 8.0), (2, 1.0 / 8.0)],
        ),
        (
            "DBFD AABCCC",
            dbfd(b"AABCCC")?.values,
            vec![
                (pair(b'A', b'A'), 0.2),
                (pair(b'A', b'B'), 0.2),
                (pair(b'B', b'C'), 0.2),
                (pair(b'C', b'C'), 0.4),
            ],
        ),
        (
            "MW AABCCCF",
            markov_walk(b"AABCCCF")?.values,
            vec![
                (pair(b'A', b'A'), 0.5),
                (pair(b'A', b'B'), 0.5),
                (pair(b'B', b'C'), 1.0),
                (pair(b'C', b'C'), 2.0 / 3.0),
                (pair(b'C', b'F'), 1.0 / 3.0),
            ],
        ),
    ];
    let mut failures = Vec::new();
    for (name, got, want) in &expected {
        let mut full = vec![0.0; got.len()];
        for &(i, v) in want {
            full[i] = v;
        }
        let worst = got
            .iter()
            .zip(&full)
            .map(|(g, w)| (g - w).abs())
            .fold(0.0, f64::max);
        if worst > 1e-12 {
            failures.push(format!("{name} off by {worst:.2e}"));
        }
    }
    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            "4 fixtures exact to 1e-12".to_string()
        } else {
            failures.join("; ")
        },
    )
}

fn fragment_classification() -> Result<Outcome> {
    let dir = tempfile::tempdir()?;
    let spec = SyntheticSourceSpec::new(6, 200, 64 * 1024, FRAGMENT_CORPUS_SEED);
    let manifest = generate_corpus(&spec, dir.path())?;
    let settings = TrainSettings::new(FeatureScheme::MarkovWalk, SizeSpec::Auto(None), FRAGMENT_CORPUS_SEED);
    let trained = train_manifest(&manifest, &settings)?;
    let (cm, _) = classify_manifest(
        &manifest,
        &trained.dictionaries,
        Extraction::fragments(10, 2000)?,
        FRAGMENT_CORPUS_SEED,
    )?;
    let per_class = cm.per_class_accuracy();
    let worst = per_class.values().copied().fold(1.0, f64::min);
    ensure!(
        per_class.len() == 6,
        "expected 6 test classes, got {}",
        per_class.len()
    );
    outcome(
        cm.accuracy() >= 0.95 && worst >= 0.85,
        format!(
            "accuracy {:.4} ({}/{}), worst class {:.4}, sizes {:?}",
            cm.accuracy(),
            cm.correct(),
            cm.total(),
            worst,
            trained.sizes
        ),
    )
}

fn payload_detection() -> Result<Outcome> {
    let dir = tempfile::tempdir()?;
    let spec = ContainerCorpusSpec {
        seed: CONTAINER_CORPUS_SEED,
        ..ContainerCorpusSpec::default()
    };
    let manifest = generate_container_corpus(&spec, dir.path())?;
    let settings = TrainSettings::new(FeatureScheme::MarkovWalk, SizeSpec::Auto(None), CONTAINER_CORPUS_SEED);
    let trained = train_manifest(&manifest, &settings)?;
    let files = scan_inputs(
        &manifest_inputs(&manifest, Split::Test),
        &trained.dictionaries,
        PAYLOAD_LABEL,
        10,
        Extraction::fragments(40, 5000)?,
        CONTAINER_CORPUS_SEED,
    )?;
    let s = summarize_scan(&files, PAYLOAD_LABEL).expect("labeled test files");
    ensure!(
        s.positives == 10 && s.negatives == 100,
        "unexpected corpus shape {s:?}"
    );
    outcome(
        s.detected >= 9 && s.false_alarm_rate <= 0.10,
        format!(
            "detected {}/{}, false alarms {}/{} ({:.1}%)",
            s.detected,
            s.positives,
            s.false_alarms,
            s.negatives,
            100.0 * s.false_alarm_rate
        ),
    )
}

/// Brute-force minimum of the summed pairwise errors with the same tie order
/// as the search: total, then sum of sizes, then the size list.
fn enumerate(matrices: &[ErrorMatrix], labels: &[String], grid: &[usize]) -> Option<(usize, Vec<usize>)> {
    let g = grid.len();
    let mut best: Option<(usize, usize, Vec<usize>)> = None;
    for code in 0..g.pow(labels.len() as u32) {
        let idx: Vec<usize> = (0..labels.len()).map(|c| code / g.pow(c as u32) % g).collect();
        let mut total = Some(0);
        for m in matrices {
            let a = labels.iter().position(|l| *l == m.class_a)?;
            let b = labels.iter().position(|l| *l == m.class_b)?;
            total = total.and_then(|t| m.errors[idx[a]][idx[b]].map(|v| t + v));
        }
        if let Some(t) = total {
            let sizes: Vec<usize> = idx.iter().map(|&i| grid[i]).collect();
            let cand = (t, sizes.iter().sum(), sizes);
            if best.as_ref().is_none_or(|b| cand < *b) {
                best = Some(cand);
            }
        }
    }
    best.map(|(t, _, s)| (t, s))
}

fn sizing_oracle() -> Result<Outcome> {
    let grid = [2, 4, 6, 9, 12];
    let mut mismatches = Vec::new();
    for inst in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(300 + inst);
        let shared = gaussian_matrix(48, 4, 1000 + inst);
        let classes: Vec<LabeledSignals> = (0..3u64)
            .map(|c| {
                let own_rank = rng.random_range(3..=10);
                let own = gaussian_matrix(48, own_rank, 2000 + 10 * inst + c);
                let weight = rng.random_range(0.2..1.0);
                let s = 3000 + 10 * inst + c;
                let x = own
                    .matmul(&gaussian_matrix(own_rank, 60, s))
                    .unwrap()
                    .add(
                        &shared
                            .matmul(&gaussian_matrix(4, 60, s ^ 7))
                            .unwrap()
                            .scaled(weight),
                    )
                    .unwrap()
                    .add(&gaussian_matrix(48, 60, s ^ 9).scaled(0.1))
                    .unwrap();
                LabeledSignals::new(format!("c{c}"), x)
            })
            .collect();
        let config = SizingConfig {
            seed: inst,
            ..SizingConfig::default()
        };
        let matrices = error_matrices(&classes, &grid, &config)?;
        let labels: Vec<String> = classes.iter().map(|c| c.label.clone()).collect();
        let want = enumerate(&matrices, &labels, &grid);
        let got = find_optimal_agreement(&matrices, &grid).ok().map(|a| {
            (
                a.total_error,
                labels.iter().map(|l| a.sizes[l]).collect::<Vec<_>>(),
            )
        });
        if got != want {
            mismatches.push(format!("instance {inst}: search {got:?}, enumeration {want:?}"));
        }
    }
    outcome(
        mismatches.is_empty(),
        if mismatches.is_empty() {
            "10/10 instances match enumeration".to_string()
        } else {
            mismatches.join("; ")
        },
    )
}

fn dist_oracle() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let mut worst = 0.0f64;
    for t in 0..100u64 {
        // A few tall cases exercise the factored projector. Dictionaries are
        // under-complete, so `k < m` and the true residual is nonzero.
        let m = if t % 25 == 0 {
            2100
        } else {
            rng.random_range(5..=120)
        };
        let k = rng.random_range(1..=(m - 1).min(30));
        let atoms = gaussian_matrix(m, k, 4000 + t);
        let x = gaussian_matrix(m, 1, 5000 + t).scaled(rng.random_range(0.1..10.0));
        let d = Dictionary::from_atoms("d", atoms.clone(), 0, FeatureScheme::BfdCdd)?;
        let got = d.dist(x.column(0))?;
        let a = to_na(&atoms);
        let b = to_na(&x);
        let coef = a
            .clone()
            .svd(true, true)
            .solve(&b, 1e-14)
            .map_err(anyhow::Error::msg)?;
        let want = (&a * coef - &b).norm();
        let rel = (got - want).abs() / want.max(f64::MIN_POSITIVE);
        worst = worst.max(rel);
    }
    outcome(
        worst <= 1e-8,
        format!("worst relative difference {worst:.2e} over 100 pairs (limit 1e-8)"),
    )
}

/// Path, prediction, distance bits and margin bits of one report.
type ReportBits = (String, String, Vec<(String, u64)>, u64);

fn bits(reports: &[FileReport]) -> Vec<ReportBits> {
    reports
        .iter()
        .map(|r| {
            (
                r.path.clone(),
                r.predicted.clone(),
                r.distances
                    .iter()
                    .map(|(l, d)| (l.clone(), d.to_bits()))
                    .collect(),
                r.margin.to_bits(),
            )
        })
        .collect()
}

fn determinism_and_persistence() -> Result<Outcome> {
    let run = || -> Result<_> {
        let dir = tempfile::tempdir()?;
        let spec = SyntheticSourceSpec::new(3, 30, 16 * 1024, 99);
        let manifest = generate_corpus(&spec, dir.path())?;
        let settings = TrainSettings::new(FeatureScheme::MarkovWalk, SizeSpec::Auto(None), 99);
        let trained = train_manifest(&manifest, &settings)?;
        let (cm, reports) = classify_manifest(
            &manifest,
            &trained.dictionaries,
            Extraction::fragments(10, 2000)?,
            99,
        )?;
        Ok((manifest, trained, cm, reports, dir))
    };
    let (manifest, first, cm1, rep1, dir) = run()?;
    let (_, second, cm2, rep2, _dir2) = run()?;
    let same_run = cm1 == cm2 && bits(&rep1) == bits(&rep2) && first.sizes == second.sizes;

    let bytes = encode_bundle(&first.dictionaries)?;
    let loaded = decode_bundle(&bytes)?;
    let same_atoms = first.dictionaries.iter().zip(loaded.iter()).all(|(a, b)| {
        a.label() == b.label()
            && a.train_seed() == b.train_seed()
            && a.atoms().shape() == b.atoms().shape()
            && a.atoms().as_col_major().iter().map(|v| v.to_bits()).eq(b
                .atoms()
                .as_col_major()
                .iter()
                .map(|v| v.to_bits()))
    }) && first.dictionaries.len() == loaded.len();
    let same_bytes = encode_bundle(&loaded)? == bytes;
    let (cm3, rep3) = classify_manifest(&manifest, &loaded, Extraction::fragments(10, 2000)?, 99)?;
    let same_results = cm3 == cm1 && bits(&rep3) == bits(&rep1);
    drop(dir);
    outcome(
        same_run && same_atoms && same_bytes && same_results,
        format!(
            "rerun identical: {same_run}; atoms bit-exact: {same_atoms}; re-encoding identical: {same_bytes}; \
             results after reload identical: {same_results}"
        ),
    )
}

type Criterion = (&'static str, Duration, fn() -> Result<Outcome>);

#[test]
fn acceptance() {
    let criteria: [Criterion; 9] = [
        (
            "factorization exactness",
            Duration::from_secs(10),
            factorization_exactness,
        ),
        (
            "factorization error bound",
            Duration::from_secs(30),
            factorization_bound,
        ),
        (
            "projection error bound",
            Duration::from_secs(30),
            projection_bound,
        ),
        ("feature fixtures", Duration::from_secs(1), feature_fixtures),
        (
            "six-class fragment classification",
            Duration::from_secs(600),
            fragment_classification,
        ),
        ("planted payload detection", Duration::from_secs(180), payload_detection),
        (
            "size agreement vs enumeration",
            Duration::from_secs(120),
            sizing_oracle,
        ),
        ("dist vs least squares", Duration::from_secs(60), dist_oracle),
        (
            "determinism and bundle round trip",
            Duration::from_secs(300),
            determinism_and_persistence,
        ),
    ];
    let mut failed = Vec::new();
    let mut out = std::io::stdout();
    writeln!(out).unwrap();
    for (i, (name, limit, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = f();
        let elapsed = start.elapsed();
        let (pass, detail) = match result {
            Ok(o) => (o.pass && elapsed <= *limit, o.detail),
            Err(e) => (false, format!("error: {e:#}")),
        };
        let line = format!(
            "{} {}. {name}: {detail} [{:.1}s, limit {}s]",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
        // Written to the real stdout so the lines show without --nocapture.
        writeln!(out, "{line}").unwrap();
        if !pass {
            failed.push(line);
        }
    }
    assert!(failed.is_empty(), "failed criteria:\n{}", failed.join("\n"));
}

#[test]
fn manifest_split_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let m = generate_corpus(&SyntheticSourceSpec::new(2, 10, 4096, 1), dir.path()).unwrap();
    let by: BTreeMap<_, _> = m
        .by_label(Split::Test)
        .into_iter()
        .map(|(l, v)| (l.to_string(), v.len()))
        .collect();
    assert_eq!(by.values().copied().collect::<Vec<_>>(), [2, 2]);
}
