//! Seeded synthetic corpora built from order-1 Markov byte sources.
//!
//! Each source draws a sub-alphabet and, for every symbol in it, a short list
//! of weighted successors. A small uniform jump within the sub-alphabet keeps
//! the chain ergodic. Distinct seeds give distinct transition structure, so
//! transition-based features separate the classes.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use ludict_core::seed;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::invalid;
use crate::manifest::{CorpusManifest, ManifestEntry, Split};

/// Probability of a uniform jump within the sub-alphabet.
const JUMP: f64 = 0.02;

#[derive(Clone, Debug)]
pub struct MarkovSource {
    alphabet: Vec<u8>,
    /// Cumulative successor distribution over `alphabet`, per alphabet
    /// position.
    cumulative: Vec<Vec<f64>>,
}

impl MarkovSource {
    pub fn from_seed(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let size = rng.random_range(64..=128);
        let mut alphabet: Vec<u8> = sample(&mut rng, 256, size).into_iter().map(|b| b as u8).collect();
        alphabet.sort_unstable();
        let cumulative = (0..size)
            .map(|_| {
                let fanout = rng.random_range(3..=8);
                let mut p = vec![JUMP / size as f64; size];
                let picks = sample(&mut rng, size, fanout);
                let weights: Vec<f64> = (0..fanout).map(|_| Exp1.sample(&mut rng)).collect();
                let total: f64 = weights.iter().sum();
                for (i, w) in picks.into_iter().zip(weights) {
                    p[i] += (1.0 - JUMP) * w / total;
                }
                let mut acc = 0.0;
                p.into_iter()
                    .map(|x| {
                        acc += x;
                        acc
                    })
                    .collect()
            })
            .collect();
        Self { alphabet, cumulative }
    }

    pub fn alphabet(&self) -> &[u8] {
        &self.alphabet
    }

    fn step(&self, state: usize, rng: &mut impl Rng) -> usize {
        let c = &self.cumulative[state];
        let u = rng.random::<f64>() * c[c.len() - 1];
        c.partition_point(|&x| x <= u).min(c.len() - 1)
    }

    /// `len` bytes from a stationary-ish walk started at a random symbol.
    pub fn generate(&self, len: usize, rng: &mut impl Rng) -> Vec<u8> {
        let mut state = rng.random_range(0..self.alphabet.len());
        (0..len)
            .map(|_| {
                state = self.step(state, rng);
                self.alphabet[state]
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SyntheticSourceSpec {
    pub class_count: usize,
    /// One transition-structure seed per class.
    pub class_seeds: Vec<u64>,
    pub bytes_per_file: usize,
    pub files_per_class: usize,
    /// Seed for the content of individual files.
    pub seed: u64,
}

impl SyntheticSourceSpec {
    /// Class seeds derived from `seed`.
    pub fn new(class_count: usize, files_per_class: usize, bytes_per_file: usize, seed: u64) -> Self {
        Self {
            class_count,
            class_seeds: (0..class_count as u64)
                .map(|i| seed::derive_index(seed::derive(seed, "class"), i))
                .collect(),
            bytes_per_file,
            files_per_class,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.class_count < 2 {
            return Err(invalid("a synthetic corpus needs at least 2 classes"));
        }
        if self.class_seeds.len() != self.class_count {
            return Err(invalid(format!(
                "{} class seeds for {} classes",
                self.class_seeds.len(),
                self.class_count
            )));
        }
        if self.class_seeds.iter().collect::<BTreeSet<_>>().len() != self.class_count {
            return Err(invalid("class seeds must be distinct"));
        }
        if self.files_per_class < 2 {
            return Err(invalid(
                "at least 2 files per class are needed for a train/test split",
            ));
        }
        if self.bytes_per_file < 2 {
            return Err(invalid("files must hold at least 2 bytes"));
        }
        Ok(())
    }

    pub fn label(i: usize) -> String {
        format!("class{i}")
    }
}

/// Number of training files out of `n` under an 80/20 split.
pub fn train_count(n: usize) -> usize {
    ((n as f64 * 0.8).round() as usize).clamp(1, n.saturating_sub(1).max(1))
}

fn write_file(dir: &Path, rel: &str, bytes: &[u8]) -> Result<()> {
    let p = dir.join(rel);
    if let Some(parent) = p.parent() {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(&p, bytes).with_context(|| format!("writing {}", p.display()))
}

fn file_rng(root: u64, rel: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed::derive(seed::derive(root, "file"), rel))
}

/// Writes the corpus and `manifest.json` into `out_dir`.
pub fn generate_corpus(spec: &SyntheticSourceSpec, out_dir: &Path) -> Result<CorpusManifest> {
    spec.validate()?;
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let n_train = train_count(spec.files_per_class);
    let mut entries = Vec::new();
    for (c, &class_seed) in spec.class_seeds.iter().enumerate() {
        let label = SyntheticSourceSpec::label(c);
        let source = MarkovSource::from_seed(class_seed);
        for i in 0..spec.files_per_class {
            let rel = format!("{label}/{i:04}.bin");
            let bytes = source.generate(spec.bytes_per_file, &mut file_rng(spec.seed, &rel));
            write_file(out_dir, &rel, &bytes)?;
            entries.push(ManifestEntry {
                path: rel,
                label: label.clone(),
                split: if i < n_train { Split::Train } else { Split::Test },
            });
        }
    }
    let manifest = CorpusManifest::new(".", entries);
    let path = out_dir.join("manifest.json");
    manifest.save(&path)?;
    // Reloading resolves the relative root against `out_dir`.
    CorpusManifest::load(path)
}

/// Container corpus with embedded content.
///
/// Training classes: plain containers, containers carrying either of two
/// media sources, and containers carrying the payload source. Test files are
/// clean containers (some with media) labeled `container`, and containers
/// with a planted payload segment labeled `payload`.
#[derive(Clone, Debug, PartialEq)]
pub struct ContainerCorpusSpec {
    pub seed: u64,
    pub train_files_per_class: usize,
    pub train_bytes: usize,
    /// Container bytes in front of the embedded content of training files.
    pub header_bytes: usize,
    pub clean_tests: usize,
    pub planted_tests: usize,
    pub test_bytes: usize,
    /// Share of a planted test file covered by the payload segment.
    pub payload_fraction: f64,
}

impl Default for ContainerCorpusSpec {
    fn default() -> Self {
        Self {
            seed: 7,
            train_files_per_class: 100,
            train_bytes: 32 * 1024,
            header_bytes: 1024,
            clean_tests: 100,
            planted_tests: 10,
            test_bytes: 160 * 1024,
            payload_fraction: 0.5,
        }
    }
}

pub const CONTAINER_LABEL: &str = "container";
pub const PAYLOAD_LABEL: &str = "payload";
const MEDIA_LABELS: [&str; 2] = ["media-a", "media-b"];

impl ContainerCorpusSpec {
    pub fn validate(&self) -> Result<()> {
        if self.train_files_per_class < 2 || self.train_bytes <= self.header_bytes + 2 {
            return Err(invalid("training files are too few or too small"));
        }
        if !(0.0..1.0).contains(&self.payload_fraction) || self.test_bytes < 4 {
            return Err(invalid(
                "payload fraction must be in [0, 1) and test files nonempty",
            ));
        }
        Ok(())
    }

    fn sources(&self) -> [(String, MarkovSource); 4] {
        let s = |name: &str| {
            (
                name.to_string(),
                MarkovSource::from_seed(seed::derive(seed::derive(self.seed, "source"), name)),
            )
        };
        [
            s(CONTAINER_LABEL),
            s(MEDIA_LABELS[0]),
            s(MEDIA_LABELS[1]),
            s(PAYLOAD_LABEL),
        ]
    }
}

/// Writes the container corpus and `manifest.json` into `out_dir`.
pub fn generate_container_corpus(spec: &ContainerCorpusSpec, out_dir: &Path) -> Result<CorpusManifest> {
    spec.validate()?;
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let [container, media_a, media_b, payload] = spec.sources();
    let mut entries = Vec::new();
    let mut push = |rel: String, label: &str, split: Split, bytes: Vec<u8>| -> Result<()> {
        write_file(out_dir, &rel, &bytes)?;
        entries.push(ManifestEntry {
            path: rel,
            label: label.to_string(),
            split,
        });
        Ok(())
    };

    for i in 0..spec.train_files_per_class {
        let rel = format!("train/{}/{i:04}.bin", container.0);
        let mut rng = file_rng(spec.seed, &rel);
        push(
            rel,
            &container.0,
            Split::Train,
            container.1.generate(spec.train_bytes, &mut rng),
        )?;
        for (label, src) in [&media_a, &media_b, &payload] {
            let rel = format!("train/{label}/{i:04}.bin");
            let mut rng = file_rng(spec.seed, &rel);
            let mut bytes = container.1.generate(spec.header_bytes, &mut rng);
            bytes.extend(src.generate(spec.train_bytes - spec.header_bytes, &mut rng));
            push(rel, label, Split::Train, bytes)?;
        }
    }

    for i in 0..spec.clean_tests {
        let rel = format!("test/clean/{i:04}.bin");
        let mut rng = file_rng(spec.seed, &rel);
        // Every other clean file carries one media segment of up to half
        // its length.
        let bytes = if i % 2 == 1 {
            let media = if i % 4 == 1 { &media_a.1 } else { &media_b.1 };
            let seg = rng.random_range(spec.test_bytes / 8..=spec.test_bytes / 2);
            splice(&container.1, media, spec.test_bytes, seg, &mut rng)
        } else {
            container.1.generate(spec.test_bytes, &mut rng)
        };
        push(rel, CONTAINER_LABEL, Split::Test, bytes)?;
    }
    for i in 0..spec.planted_tests {
        let rel = format!("test/planted/{i:04}.bin");
        let mut rng = file_rng(spec.seed, &rel);
        let seg = (spec.test_bytes as f64 * spec.payload_fraction).round() as usize;
        push(
            rel,
            PAYLOAD_LABEL,
            Split::Test,
            splice(&container.1, &payload.1, spec.test_bytes, seg, &mut rng),
        )?;
    }

    let manifest = CorpusManifest::new(".", entries);
    let path = out_dir.join("manifest.json");
    manifest.save(&path)?;
    // Reloading resolves the relative root against `out_dir`.
    CorpusManifest::load(path)
}

/// `total` bytes of `outer` with one contiguous `inner` segment of length
/// `seg` at a random position.
fn splice(
    outer: &MarkovSource,
    inner: &MarkovSource,
    total: usize,
    seg: usize,
    rng: &mut impl Rng,
) -> Vec<u8> {
    let seg = seg.min(total);
    let start = rng.random_range(0..=total - seg);
    let mut bytes = outer.generate(start, rng);
    bytes.extend(inner.generate(seg, rng));
    bytes.extend(outer.generate(total - start - seg, rng));
    bytes
}
