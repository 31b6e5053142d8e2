//! Normalized byte-statistics features and fragment sampling.
//!
//! | scheme | dimension | layout |
//! |---|---|---|
//! | [`FeatureScheme::BfdCdd`] | 512 | byte histogram / len, then `|b[i+1] − b[i]|` histogram / (len − 1) |
//! | [`FeatureScheme::Dbfd`] | 65536 | overlapping pair `(a, b)` at `256·a + b`, counts / (len − 1) |
//! | [`FeatureScheme::MarkovWalk`] | 65536 | `count(a→b) / count(a→·)` at `256·a + b`, unobserved rows zero |
//!
//! The counts are already normalized by the buffer length, so whole files
//! and fragments of any size produce comparable vectors without a further
//! scaling pass.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FeatureError {
    #[error("input of {len} bytes is too short (need at least 2)")]
    InputTooShort { len: usize },
    #[error("invalid fragment spec: {0}")]
    InvalidFragmentSpec(String),
    #[error("unknown feature scheme {0:?} (expected bfd-cdd, dbfd or mw)")]
    UnknownScheme(String),
    #[error("unknown feature scheme code {0}")]
    UnknownSchemeCode(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureScheme {
    BfdCdd,
    Dbfd,
    MarkovWalk,
}

impl FeatureScheme {
    pub const ALL: [FeatureScheme; 3] = [Self::BfdCdd, Self::Dbfd, Self::MarkovWalk];

    pub fn dimension(self) -> usize {
        match self {
            Self::BfdCdd => 512,
            Self::Dbfd | Self::MarkovWalk => 65536,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Self::BfdCdd => "bfd-cdd",
            Self::Dbfd => "dbfd",
            Self::MarkovWalk => "mw",
        }
    }

    /// Single-byte code used by the binary formats.
    pub fn code(self) -> u8 {
        match self {
            Self::BfdCdd => 1,
            Self::Dbfd => 2,
            Self::MarkovWalk => 3,
        }
    }

    pub fn from_code(code: u8) -> Result<Self, FeatureError> {
        Self::ALL
            .into_iter()
            .find(|s| s.code() == code)
            .ok_or(FeatureError::UnknownSchemeCode(code))
    }

    pub fn extract(self, bytes: &[u8]) -> Result<FeatureVector, FeatureError> {
        match self {
            Self::BfdCdd => bfd_cdd(bytes),
            Self::Dbfd => dbfd(bytes),
            Self::MarkovWalk => markov_walk(bytes),
        }
    }
}

impl fmt::Display for FeatureScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for FeatureScheme {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bfd-cdd" | "bfd_cdd" | "bfdcdd" => Ok(Self::BfdCdd),
            "dbfd" => Ok(Self::Dbfd),
            "mw" | "markov-walk" => Ok(Self::MarkovWalk),
            _ => Err(FeatureError::UnknownScheme(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub scheme: FeatureScheme,
    pub values: Vec<f64>,
    /// Length of the buffer the vector was extracted from.
    pub source_bytes: usize,
}

impl FeatureVector {
    /// Nonzero entries as `(index, value)`.
    pub fn nonzeros(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(i, &v)| (i, v))
    }
}

fn check_len(bytes: &[u8]) -> Result<(), FeatureError> {
    if bytes.len() < 2 {
        return Err(FeatureError::InputTooShort { len: bytes.len() });
    }
    Ok(())
}

/// Byte frequency distribution followed by the consecutive (absolute)
/// difference distribution.
pub fn bfd_cdd(bytes: &[u8]) -> Result<FeatureVector, FeatureError> {
    check_len(bytes)?;
    let mut counts = [0u64; 512];
    for &b in bytes {
        counts[b as usize] += 1;
    }
    for w in bytes.windows(2) {
        counts[256 + w[0].abs_diff(w[1]) as usize] += 1;
    }
    let n = bytes.len() as f64;
    let pairs = (bytes.len() - 1) as f64;
    let values = counts
        .iter()
        .enumerate()
        .map(|(i, &c)| c as f64 / if i < 256 { n } else { pairs })
        .collect();
    Ok(FeatureVector {
        scheme: FeatureScheme::BfdCdd,
        values,
        source_bytes: bytes.len(),
    })
}

fn pair_counts(bytes: &[u8]) -> Vec<u32> {
    let mut counts = vec![0u32; 65536];
    for w in bytes.windows(2) {
        counts[(w[0] as usize) << 8 | w[1] as usize] += 1;
    }
    counts
}

/// Double-byte frequency distribution over overlapping pairs.
pub fn dbfd(bytes: &[u8]) -> Result<FeatureVector, FeatureError> {
    check_len(bytes)?;
    let pairs = (bytes.len() - 1) as f64;
    let values = pair_counts(bytes).into_iter().map(|c| c as f64 / pairs).collect();
    Ok(FeatureVector {
        scheme: FeatureScheme::Dbfd,
        values,
        source_bytes: bytes.len(),
    })
}

/// Row-normalized byte transition table.
pub fn markov_walk(bytes: &[u8]) -> Result<FeatureVector, FeatureError> {
    check_len(bytes)?;
    let counts = pair_counts(bytes);
    let mut values = vec![0.0; 65536];
    for (src, dst) in counts.chunks_exact(256).zip(values.chunks_exact_mut(256)) {
        let total: u32 = src.iter().sum();
        if total == 0 {
            continue;
        }
        let total = total as f64;
        for (d, &c) in dst.iter_mut().zip(src) {
            *d = c as f64 / total;
        }
    }
    Ok(FeatureVector {
        scheme: FeatureScheme::MarkovWalk,
        values,
        source_bytes: bytes.len(),
    })
}

/// How many fragments to draw from a file and how large each one is.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FragmentSpec {
    count: usize,
    bytes: usize,
    seed: u64,
}

impl FragmentSpec {
    pub fn new(count: usize, bytes: usize, seed: u64) -> Result<Self, FeatureError> {
        if count == 0 {
            return Err(FeatureError::InvalidFragmentSpec(
                "fragment count must be >= 1".into(),
            ));
        }
        if bytes < 2 {
            return Err(FeatureError::InvalidFragmentSpec(
                "fragment size must be >= 2 bytes".into(),
            ));
        }
        Ok(Self { count, bytes, seed })
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn bytes(&self) -> usize {
        self.bytes
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fragment<'a> {
    pub offset: usize,
    pub bytes: &'a [u8],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampledFragments<'a> {
    pub fragments: Vec<Fragment<'a>>,
    /// The file was shorter than one fragment and is returned whole.
    pub file_too_small: bool,
}

/// Draws `spec.count()` contiguous slices of `spec.bytes()` bytes at
/// independent uniform offsets in `[0, len − bytes]`. Overlaps are allowed.
pub fn sample_fragments<'a>(bytes: &'a [u8], spec: &FragmentSpec) -> SampledFragments<'a> {
    if bytes.len() < spec.bytes {
        return SampledFragments {
            fragments: vec![Fragment { offset: 0, bytes }],
            file_too_small: true,
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let last = bytes.len() - spec.bytes;
    let fragments = (0..spec.count)
        .map(|_| {
            let offset = rng.random_range(0..=last);
            Fragment {
                offset,
                bytes: &bytes[offset..offset + spec.bytes],
            }
        })
        .collect();
    SampledFragments {
        fragments,
        file_too_small: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(v: &FeatureVector, i: usize) -> f64 {
        v.values[i]
    }

    fn pair(a: u8, b: u8) -> usize {
        (a as usize) << 8 | b as usize
    }

    #[test]
    fn bfd_matches_worked_example() {
        let v = bfd_cdd(b"AABCCCDR").unwrap();
        assert_eq!(v.values.len(), 512);
        assert_eq!(at(&v, b'A' as usize), 0.25);
        assert_eq!(at(&v, b'B' as usize), 0.125);
        assert_eq!(at(&v, b'C' as usize), 0.375);
        assert_eq!(at(&v, b'D' as usize), 0.125);
        assert_eq!(at(&v, b'R' as usize), 0.125);
        assert_eq!(v.values[..256].iter().filter(|&&x| x != 0.0).count(), 5);
    }

    #[test]
    fn cdd_matches_worked_example() {
        let v = bfd_cdd(b"AABCCCDFG").unwrap();
        assert_eq!(at(&v, 256), 0.375);
        assert_eq!(at(&v, 257), 0.5);
        assert_eq!(at(&v, 258), 0.125);
        assert_eq!(v.values[256..].iter().filter(|&&x| x != 0.0).count(), 3);
    }

    #[test]
    fn constant_buffer() {
        let v = bfd_cdd(b"AAAA").unwrap();
        assert_eq!(at(&v, b'A' as usize), 1.0);
        assert_eq!(at(&v, 256), 1.0);
    }

    #[test]
    fn cdd_uses_absolute_difference() {
        let v = bfd_cdd(b"ZA").unwrap();
        assert_eq!(at(&v, 256 + 25), 1.0);
    }

    #[test]
    fn dbfd_matches_worked_example() {
        let v = dbfd(b"AABCCC").unwrap();
        assert!((at(&v, pair(b'A', b'A')) - 0.2).abs() < 1e-15);
        assert!((at(&v, pair(b'A', b'B')) - 0.2).abs() < 1e-15);
        assert!((at(&v, pair(b'B', b'C')) - 0.2).abs() < 1e-15);
        assert!((at(&v, pair(b'C', b'C')) - 0.4).abs() < 1e-15);
        assert_eq!(v.nonzeros().count(), 4);
        assert_eq!(at(&dbfd(b"AB").unwrap(), pair(b'A', b'B')), 1.0);
    }

    #[test]
    fn markov_walk_matches_worked_example() {
        let v = markov_walk(b"AABCCCF").unwrap();
        assert_eq!(at(&v, pair(b'A', b'A')), 0.5);
        assert_eq!(at(&v, pair(b'A', b'B')), 0.5);
        assert_eq!(at(&v, pair(b'B', b'C')), 1.0);
        assert!((at(&v, pair(b'C', b'C')) - 2.0 / 3.0).abs() < 1e-15);
        assert!((at(&v, pair(b'C', b'F')) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(v.nonzeros().count(), 5);

        let alt = markov_walk(b"ABABAB").unwrap();
        assert_eq!(at(&alt, pair(b'A', b'B')), 1.0);
        assert_eq!(at(&alt, pair(b'B', b'A')), 1.0);
        assert_eq!(alt.nonzeros().count(), 2);
    }

    #[test]
    fn short_inputs_are_rejected() {
        for s in FeatureScheme::ALL {
            assert_eq!(s.extract(b"A"), Err(FeatureError::InputTooShort { len: 1 }));
            assert!(s.extract(b"").is_err());
        }
    }

    #[test]
    fn scheme_names_and_codes() {
        for s in FeatureScheme::ALL {
            assert_eq!(s.tag().parse::<FeatureScheme>().unwrap(), s);
            assert_eq!(FeatureScheme::from_code(s.code()).unwrap(), s);
        }
        assert!("trigram".parse::<FeatureScheme>().is_err());
        assert!(FeatureScheme::from_code(0).is_err());
    }

    #[test]
    fn fragment_sampling_bounds_and_determinism() {
        let data: Vec<u8> = (0..15000u32).map(|i| (i % 251) as u8).collect();
        let spec = FragmentSpec::new(10, 1500, 42).unwrap();
        let s = sample_fragments(&data, &spec);
        assert!(!s.file_too_small);
        assert_eq!(s.fragments.len(), 10);
        for f in &s.fragments {
            assert_eq!(f.bytes.len(), 1500);
            assert!(f.offset + 1500 <= data.len());
            assert_eq!(f.bytes, &data[f.offset..f.offset + 1500]);
        }
        assert_eq!(s, sample_fragments(&data, &spec));
        let other = sample_fragments(&data, &spec.with_seed(43));
        assert_ne!(s.fragments, other.fragments);
    }

    #[test]
    fn exact_size_and_small_files() {
        let data = vec![7u8; 2000];
        let spec = FragmentSpec::new(3, 2000, 1).unwrap();
        let s = sample_fragments(&data, &spec);
        assert!(s.fragments.iter().all(|f| f.offset == 0 && f.bytes == &data[..]));
        assert_eq!(s.fragments.len(), 3);

        let small = vec![1u8; 100];
        let s = sample_fragments(&small, &spec);
        assert!(s.file_too_small);
        assert_eq!(s.fragments.len(), 1);
        assert_eq!(s.fragments[0].bytes.len(), 100);
    }

    #[test]
    fn fragment_spec_validation() {
        assert!(FragmentSpec::new(0, 100, 0).is_err());
        assert!(FragmentSpec::new(1, 1, 0).is_err());
    }
}
