//! Per-class dictionaries built from randomized LU, the projection distance
//! `dist(x, D) = ‖D·D†·x − x‖`, and the classifiers built on it.
//!
//! A dictionary for class `t` is `D_t = P_tᵀ·L_t` from a rank-`k_t`
//! randomized LU of the class's training matrix (signals as columns), with
//! `l_t = k_t + 5` projections by default. Classification picks the
//! dictionary with the smallest distance; fragment sets use the mean
//! distance per dictionary. Ties go to the lexicographically smallest label.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::features::FeatureScheme;
use crate::linalg::{pseudo_inverse_transposed, DenseMatrix, MatrixError};
use crate::randomized_lu::{randomized_lu, RandomizedLuError, DEFAULT_OVERSAMPLING};
use crate::seed;

/// Largest feature dimension for which the `m × m` projector is stored
/// explicitly. Above it the projector stays factored as `D` and `D†`.
pub const DENSE_PROJECTOR_MAX_DIM: usize = 2048;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DictionaryError {
    #[error("signal dimension {got} does not match dictionary dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("dictionary for {label:?} is rank deficient")]
    RankDeficient { label: String },
    #[error("training class {label:?} failed: {source}")]
    Training {
        label: String,
        #[source]
        source: RandomizedLuError,
    },
    #[error("class {label:?} has {signals} signals but a size of {k} was requested")]
    InsufficientSignals { label: String, signals: usize, k: usize },
    #[error("no dictionary size given for class {0:?}")]
    MissingSize(String),
    #[error("classification needs at least {needed} dictionaries, got {got}")]
    TooFewDictionaries { needed: usize, got: usize },
    #[error("no signals to classify")]
    NoSignals,
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
    #[error("dictionary {label:?} uses scheme {got}, the set uses {expected}")]
    SchemeMismatch {
        label: String,
        expected: FeatureScheme,
        got: FeatureScheme,
    },
    #[error("duplicate dictionary label {0:?}")]
    DuplicateLabel(String),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

/// Realization of `x ↦ D·D†·x`.
#[derive(Clone, Debug, PartialEq)]
pub enum Projector {
    /// The `m × m` matrix `D·D†`.
    Dense(DenseMatrix),
    /// `(D†)ᵀ` (`m × k`); the projector is applied as `D·((D†)ᵀ)ᵀ·x`.
    Factored { pinv_t: DenseMatrix },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dictionary {
    label: String,
    atoms: DenseMatrix,
    projector: Projector,
    train_seed: u64,
    scheme: FeatureScheme,
}

impl Dictionary {
    /// Wraps a basis `D` (`m × k`, full column rank) and precomputes its
    /// projector.
    pub fn from_atoms(
        label: impl Into<String>,
        atoms: DenseMatrix,
        train_seed: u64,
        scheme: FeatureScheme,
    ) -> Result<Self, DictionaryError> {
        let label = label.into();
        let pinv_t = match pseudo_inverse_transposed(&atoms) {
            Ok(p) => p,
            Err(MatrixError::RankDeficient { .. }) => return Err(DictionaryError::RankDeficient { label }),
            Err(e) => return Err(e.into()),
        };
        let projector = if atoms.rows() <= DENSE_PROJECTOR_MAX_DIM {
            Projector::Dense(atoms.matmul_tr(&pinv_t)?)
        } else {
            Projector::Factored { pinv_t }
        };
        Ok(Self {
            label,
            atoms,
            projector,
            train_seed,
            scheme,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// `D`, one atom per column.
    pub fn atoms(&self) -> &DenseMatrix {
        &self.atoms
    }

    pub fn projector(&self) -> &Projector {
        &self.projector
    }

    /// Number of atoms.
    pub fn k(&self) -> usize {
        self.atoms.cols()
    }

    pub fn dimension(&self) -> usize {
        self.atoms.rows()
    }

    pub fn train_seed(&self) -> u64 {
        self.train_seed
    }

    pub fn scheme(&self) -> FeatureScheme {
        self.scheme
    }

    /// `D·D†` as an explicit matrix, whichever form is stored.
    pub fn projector_matrix(&self) -> DenseMatrix {
        match &self.projector {
            Projector::Dense(p) => p.clone(),
            Projector::Factored { pinv_t } => self.atoms.matmul_tr(pinv_t).expect("shapes agree"),
        }
    }

    /// `D·D†·X` for signals stored as the columns of `x`.
    pub fn project(&self, x: &DenseMatrix) -> Result<DenseMatrix, DictionaryError> {
        if x.rows() != self.dimension() {
            return Err(DictionaryError::DimensionMismatch {
                expected: self.dimension(),
                got: x.rows(),
            });
        }
        Ok(match &self.projector {
            Projector::Dense(p) => p.matmul(x)?,
            Projector::Factored { pinv_t } => self.atoms.matmul(&pinv_t.tr_matmul(x)?)?,
        })
    }

    /// `dist` for every column of `x`.
    pub fn distances(&self, x: &DenseMatrix) -> Result<Vec<f64>, DictionaryError> {
        let proj = self.project(x)?;
        Ok((0..x.cols())
            .map(|j| {
                proj.column(j)
                    .iter()
                    .zip(x.column(j))
                    .map(|(p, v)| (p - v) * (p - v))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect())
    }

    pub fn dist(&self, x: &[f64]) -> Result<f64, DictionaryError> {
        if x.len() != self.dimension() {
            return Err(DictionaryError::DimensionMismatch {
                expected: self.dimension(),
                got: x.len(),
            });
        }
        let col = DenseMatrix::new(x.len(), 1, x.to_vec())?;
        Ok(self.distances(&col)?[0])
    }
}

/// `‖D·D†·x − x‖`.
pub fn dist(x: &[f64], d: &Dictionary) -> Result<f64, DictionaryError> {
    d.dist(x)
}

/// Dictionaries keyed by label, all sharing one feature scheme and
/// dimension. Iteration is in label order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DictionarySet {
    dicts: BTreeMap<String, Dictionary>,
}

impl DictionarySet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, d: Dictionary) -> Result<(), DictionaryError> {
        if let Some(first) = self.dicts.values().next() {
            if first.scheme() != d.scheme() {
                return Err(DictionaryError::SchemeMismatch {
                    label: d.label().to_string(),
                    expected: first.scheme(),
                    got: d.scheme(),
                });
            }
            if first.dimension() != d.dimension() {
                return Err(DictionaryError::DimensionMismatch {
                    expected: first.dimension(),
                    got: d.dimension(),
                });
            }
        }
        if self.dicts.contains_key(d.label()) {
            return Err(DictionaryError::DuplicateLabel(d.label().to_string()));
        }
        self.dicts.insert(d.label().to_string(), d);
        Ok(())
    }

    pub fn from_dictionaries(dicts: impl IntoIterator<Item = Dictionary>) -> Result<Self, DictionaryError> {
        let mut set = Self::new();
        for d in dicts {
            set.insert(d)?;
        }
        Ok(set)
    }

    pub fn get(&self, label: &str) -> Option<&Dictionary> {
        self.dicts.get(label)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Dictionary> {
        self.dicts.values()
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.dicts.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.dicts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dicts.is_empty()
    }

    pub fn dimension(&self) -> Option<usize> {
        self.dicts.values().next().map(Dictionary::dimension)
    }

    pub fn scheme(&self) -> Option<FeatureScheme> {
        self.dicts.values().next().map(Dictionary::scheme)
    }

    /// Keeps only the listed labels.
    pub fn subset(&self, labels: &[&str]) -> Result<Self, DictionaryError> {
        let mut out = Self::new();
        for &l in labels {
            let d = self
                .get(l)
                .ok_or_else(|| DictionaryError::UnknownLabel(l.to_string()))?;
            out.insert(d.clone())?;
        }
        Ok(out)
    }
}

/// Trains one dictionary from the columns of `signals` with
/// `l = min(k + oversampling, min(m, n))`.
pub fn train_one(
    label: &str,
    signals: &DenseMatrix,
    k: usize,
    oversampling: usize,
    seed: u64,
    scheme: FeatureScheme,
) -> Result<Dictionary, DictionaryError> {
    let (m, n) = signals.shape();
    if k == 0 || k > n.min(m) {
        return Err(DictionaryError::InsufficientSignals {
            label: label.to_string(),
            signals: n,
            k,
        });
    }
    let l = (k + oversampling).min(m.min(n));
    let r = randomized_lu(signals, k, l, seed).map_err(|source| DictionaryError::Training {
        label: label.to_string(),
        source,
    })?;
    Dictionary::from_atoms(label, r.basis(), seed, scheme)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrainingOptions {
    /// `l − k`.
    pub oversampling: usize,
    pub seed: u64,
}

impl Default for TrainingOptions {
    fn default() -> Self {
        Self {
            oversampling: DEFAULT_OVERSAMPLING,
            seed: 0,
        }
    }
}

/// Seed used to train the dictionary of `label` under root `seed`.
pub fn class_seed(root: u64, label: &str) -> u64 {
    seed::derive(root, label)
}

/// Trains one dictionary per class from `(label, training matrix)` pairs,
/// signals as columns.
pub fn train<'a, L: AsRef<str>>(
    classes: impl IntoIterator<Item = (L, &'a DenseMatrix)>,
    sizes: &BTreeMap<String, usize>,
    scheme: FeatureScheme,
    options: TrainingOptions,
) -> Result<DictionarySet, DictionaryError> {
    let mut set = DictionarySet::new();
    for (label, signals) in classes {
        let label = label.as_ref();
        if signals.rows() != scheme.dimension() {
            return Err(DictionaryError::DimensionMismatch {
                expected: scheme.dimension(),
                got: signals.rows(),
            });
        }
        let k = *sizes
            .get(label)
            .ok_or_else(|| DictionaryError::MissingSize(label.to_string()))?;
        let d = train_one(
            label,
            signals,
            k,
            options.oversampling,
            class_seed(options.seed, label),
            scheme,
        )?;
        set.insert(d)?;
    }
    Ok(set)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassificationReport {
    /// Distance (or mean distance, for fragment sets) per label.
    pub distances: BTreeMap<String, f64>,
    pub predicted: String,
    /// Runner-up distance minus best distance.
    pub margin: f64,
}

impl ClassificationReport {
    /// Argmin over `distances`, first label wins ties.
    pub fn from_distances(distances: BTreeMap<String, f64>) -> Result<Self, DictionaryError> {
        if distances.len() < 2 {
            return Err(DictionaryError::TooFewDictionaries {
                needed: 2,
                got: distances.len(),
            });
        }
        let mut best: Option<(&String, f64)> = None;
        let mut second = f64::INFINITY;
        for (label, &d) in &distances {
            match best {
                Some((_, b)) if d >= b => second = second.min(d),
                Some((_, b)) => {
                    second = second.min(b);
                    best = Some((label, d));
                }
                None => best = Some((label, d)),
            }
        }
        let (predicted, best) = best.expect("at least two entries");
        Ok(Self {
            predicted: predicted.clone(),
            margin: second - best,
            distances,
        })
    }
}

/// Stacks equally sized vectors as the columns of a matrix.
fn stack<V: AsRef<[f64]>>(vectors: &[V], dim: usize) -> Result<DenseMatrix, DictionaryError> {
    if vectors.is_empty() {
        return Err(DictionaryError::NoSignals);
    }
    for v in vectors {
        if v.as_ref().len() != dim {
            return Err(DictionaryError::DimensionMismatch {
                expected: dim,
                got: v.as_ref().len(),
            });
        }
    }
    Ok(DenseMatrix::from_columns(vectors)?)
}

fn require_two(dicts: &DictionarySet) -> Result<usize, DictionaryError> {
    if dicts.len() < 2 {
        return Err(DictionaryError::TooFewDictionaries {
            needed: 2,
            got: dicts.len(),
        });
    }
    Ok(dicts.dimension().expect("nonempty set"))
}

/// `dist` of every column of `signals` to every dictionary, keyed by label.
pub fn distance_table(
    signals: &DenseMatrix,
    dicts: &DictionarySet,
) -> Result<BTreeMap<String, Vec<f64>>, DictionaryError> {
    dicts
        .iter()
        .map(|d| Ok((d.label().to_string(), d.distances(signals)?)))
        .collect()
}

/// Assigns `x` to the dictionary at minimal distance.
pub fn classify_signal(x: &[f64], dicts: &DictionarySet) -> Result<ClassificationReport, DictionaryError> {
    classify_fragments(&[x], dicts)
}

/// Assigns a set of fragments to the dictionary with the smallest mean
/// distance.
pub fn classify_fragments<V: AsRef<[f64]>>(
    fragments: &[V],
    dicts: &DictionarySet,
) -> Result<ClassificationReport, DictionaryError> {
    let dim = require_two(dicts)?;
    let x = stack(fragments, dim)?;
    classify_columns(&x, dicts)
}

/// [`classify_fragments`] for fragments already stacked as columns.
pub fn classify_columns(
    fragments: &DenseMatrix,
    dicts: &DictionarySet,
) -> Result<ClassificationReport, DictionaryError> {
    require_two(dicts)?;
    let table = distance_table(fragments, dicts)?;
    let n = fragments.cols() as f64;
    let means = table
        .into_iter()
        .map(|(label, ds)| (label, ds.iter().sum::<f64>() / n))
        .collect();
    ClassificationReport::from_distances(means)
}

/// Outcome of scanning a container's fragments for a payload class.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddedDetection {
    /// Fragments whose individual prediction is the payload label.
    pub payload_fragments: usize,
    /// `payload_fragments > threshold`.
    pub flagged: bool,
    /// Per-fragment predicted labels, in input order.
    pub predictions: Vec<String>,
}

/// Classifies each fragment on its own and flags the container when more
/// than `threshold` fragments land on `payload_label`.
pub fn detect_embedded<V: AsRef<[f64]>>(
    fragments: &[V],
    dicts: &DictionarySet,
    payload_label: &str,
    threshold: usize,
) -> Result<EmbeddedDetection, DictionaryError> {
    if dicts.get(payload_label).is_none() {
        return Err(DictionaryError::UnknownLabel(payload_label.to_string()));
    }
    let dim = require_two(dicts)?;
    let x = stack(fragments, dim)?;
    detect_embedded_columns(&x, dicts, payload_label, threshold)
}

/// [`detect_embedded`] for fragments already stacked as columns.
pub fn detect_embedded_columns(
    fragments: &DenseMatrix,
    dicts: &DictionarySet,
    payload_label: &str,
    threshold: usize,
) -> Result<EmbeddedDetection, DictionaryError> {
    if dicts.get(payload_label).is_none() {
        return Err(DictionaryError::UnknownLabel(payload_label.to_string()));
    }
    require_two(dicts)?;
    let table = distance_table(fragments, dicts)?;
    let mut predictions = Vec::with_capacity(fragments.cols());
    for j in 0..fragments.cols() {
        let per: BTreeMap<String, f64> = table.iter().map(|(l, ds)| (l.clone(), ds[j])).collect();
        predictions.push(ClassificationReport::from_distances(per)?.predicted);
    }
    let payload_fragments = predictions.iter().filter(|p| *p == payload_label).count();
    Ok(EmbeddedDetection {
        payload_fragments,
        flagged: payload_fragments > threshold,
        predictions,
    })
}
