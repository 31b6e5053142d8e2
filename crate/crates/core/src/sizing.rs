//! Choosing one dictionary size per class.
//!
//! Each class is split into training and validation columns. For every pair
//! of classes and every pair of candidate sizes `(k_a, k_b)` the two
//! dictionaries are trained and the validation signals of both classes are
//! classified between them; the cross-misclassification counts form an
//! [`ErrorMatrix`]. [`find_optimal_agreement`] then picks one size per class
//! minimizing the sum of the pairwise counts.
//!
//! Dictionaries are keyed by `(label, k)` with a seed derived from the root
//! seed, the label and `k`, so a cell's value does not depend on which pair
//! or in which order it is evaluated.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dictionary::{train_one, Dictionary, DictionaryError};
use crate::features::FeatureScheme;
use crate::linalg::{numerical_rank, DenseMatrix};
use crate::randomized_lu::{RandomizedLuError, DEFAULT_OVERSAMPLING};
use crate::seed;

/// Problems above this size are solved exactly; larger ones use coordinate
/// descent.
pub const EXHAUSTIVE_MAX_CLASSES: usize = 6;
pub const EXHAUSTIVE_MAX_GRID: usize = 12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SizingError {
    #[error("invalid size grid: {0}")]
    InvalidGrid(String),
    #[error("sizing needs at least two classes, got {0}")]
    TooFewClasses(usize),
    #[error("class {label:?} has {signals} signals; at least 2 are needed to split")]
    TooFewSignals { label: String, signals: usize },
    #[error("duplicate class label {0:?}")]
    DuplicateLabel(String),
    #[error("no error matrix for classes {0:?} and {1:?}")]
    MissingPair(String, String),
    #[error("more than one error matrix for classes {0:?} and {1:?}")]
    DuplicatePair(String, String),
    #[error("every size assignment touches an infeasible cell")]
    Infeasible,
    #[error("no size given for class {0:?}")]
    MissingSize(String),
    #[error(transparent)]
    Dictionary(#[from] DictionaryError),
}

/// Training signals of one class, one per column.
#[derive(Clone, Debug)]
pub struct LabeledSignals {
    pub label: String,
    pub signals: DenseMatrix,
}

impl LabeledSignals {
    pub fn new(label: impl Into<String>, signals: DenseMatrix) -> Self {
        Self {
            label: label.into(),
            signals,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SizingConfig {
    pub seed: u64,
    /// `l − k` for every trained dictionary.
    pub oversampling: usize,
    /// Fraction of each class used for training; the rest validates.
    pub train_fraction: f64,
    /// Squared Frobenius fraction defining the numerical rank.
    pub energy: f64,
    /// Number of points in the default grid.
    pub grid_points: usize,
    /// Smallest size in the default grid.
    pub grid_floor: usize,
}

impl Default for SizingConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            oversampling: DEFAULT_OVERSAMPLING,
            train_fraction: 0.8,
            energy: 0.95,
            grid_points: 8,
            grid_floor: 10,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SplitSignals {
    pub train: DenseMatrix,
    pub validation: DenseMatrix,
}

/// Seeded shuffle of the columns into training and validation parts.
pub fn split_signals(class: &LabeledSignals, config: &SizingConfig) -> Result<SplitSignals, SizingError> {
    let n = class.signals.cols();
    if n < 2 {
        return Err(SizingError::TooFewSignals {
            label: class.label.clone(),
            signals: n,
        });
    }
    let n_train = ((n as f64 * config.train_fraction).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(seed::derive(config.seed, "split"), &class.label));
    order.shuffle(&mut rng);
    let (tr, va) = order.split_at(n_train);
    let (mut tr, mut va) = (tr.to_vec(), va.to_vec());
    tr.sort_unstable();
    va.sort_unstable();
    Ok(SplitSignals {
        train: class.signals.select_columns(&tr),
        validation: class.signals.select_columns(&va),
    })
}

/// Seed of the size-`k` dictionary of `label`.
pub fn dictionary_seed(root: u64, label: &str, k: usize) -> u64 {
    seed::derive_index(seed::derive(seed::derive(root, "dictionary"), label), k as u64)
}

/// Cross-misclassification counts for one pair of classes over a grid.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ErrorMatrix {
    pub class_a: String,
    pub class_b: String,
    pub grid: Vec<usize>,
    /// `errors[s][t]`: validation signals of `a` assigned to `b` plus those
    /// of `b` assigned to `a`, with `a` sized `grid[s]` and `b` sized
    /// `grid[t]`. `None` marks a cell where a dictionary could not be built.
    pub errors: Vec<Vec<Option<usize>>>,
    /// Validation signal counts of `a` and `b`.
    pub validation_counts: (usize, usize),
}

impl ErrorMatrix {
    pub fn get(&self, s: usize, t: usize) -> Option<usize> {
        self.errors[s][t]
    }

    /// Same matrix with the roles of the classes exchanged.
    pub fn transposed(&self) -> Self {
        let g = self.grid.len();
        Self {
            class_a: self.class_b.clone(),
            class_b: self.class_a.clone(),
            grid: self.grid.clone(),
            errors: (0..g)
                .map(|t| (0..g).map(|s| self.errors[s][t]).collect())
                .collect(),
            validation_counts: (self.validation_counts.1, self.validation_counts.0),
        }
    }

    /// Grid header row then one row per size of `a`; infeasible cells are
    /// written as `NA`.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\\{}", self.class_a, self.class_b);
        for k in &self.grid {
            out.push_str(&format!(",{k}"));
        }
        out.push('\n');
        for (s, row) in self.errors.iter().enumerate() {
            out.push_str(&self.grid[s].to_string());
            for c in row {
                match c {
                    Some(v) => out.push_str(&format!(",{v}")),
                    None => out.push_str(",NA"),
                }
            }
            out.push('\n');
        }
        out
    }
}

fn validate_grid(grid: &[usize]) -> Result<(), SizingError> {
    if grid.is_empty() {
        return Err(SizingError::InvalidGrid("empty".into()));
    }
    if grid[0] == 0 {
        return Err(SizingError::InvalidGrid("sizes must be positive".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(SizingError::InvalidGrid(
            "sizes must be strictly increasing".into(),
        ));
    }
    Ok(())
}

struct Prepared<'a> {
    labels: Vec<&'a str>,
    splits: Vec<SplitSignals>,
}

fn prepare<'a>(classes: &'a [LabeledSignals], config: &SizingConfig) -> Result<Prepared<'a>, SizingError> {
    if classes.len() < 2 {
        return Err(SizingError::TooFewClasses(classes.len()));
    }
    let mut seen = BTreeSet::new();
    for c in classes {
        if !seen.insert(c.label.as_str()) {
            return Err(SizingError::DuplicateLabel(c.label.clone()));
        }
    }
    let splits = classes
        .iter()
        .map(|c| split_signals(c, config))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Prepared {
        labels: classes.iter().map(|c| c.label.as_str()).collect(),
        splits,
    })
}

/// Trains the size-`k` dictionary of class `c`, or `None` when the data
/// cannot support it.
fn sized_dictionary(
    p: &Prepared<'_>,
    c: usize,
    k: usize,
    config: &SizingConfig,
) -> Result<Option<Dictionary>, SizingError> {
    let train = &p.splits[c].train;
    let cap = train.rows().min(train.cols());
    if k > cap {
        return Err(SizingError::InvalidGrid(format!(
            "size {k} exceeds min(dimension, training signals) = {cap} for class {:?}",
            p.labels[c]
        )));
    }
    match train_one(
        p.labels[c],
        train,
        k,
        config.oversampling,
        dictionary_seed(config.seed, p.labels[c], k),
        // Transient dictionaries; the scheme tag is never read.
        FeatureScheme::BfdCdd,
    ) {
        Ok(d) => Ok(Some(d)),
        Err(DictionaryError::Training {
            source: RandomizedLuError::RankCollapse { .. },
            ..
        })
        | Err(DictionaryError::RankDeficient { .. }) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn validation_distances(
    p: &Prepared<'_>,
    d: &Dictionary,
    targets: &[usize],
) -> Result<BTreeMap<usize, Vec<f64>>, SizingError> {
    targets
        .iter()
        .map(|&c| Ok((c, d.distances(&p.splits[c].validation)?)))
        .collect()
}

/// Distances from one trained dictionary to the validation sets it is
/// compared against, keyed by class index. `None` when training failed.
type ValidationDistances = Option<BTreeMap<usize, Vec<f64>>>;

/// `dists[c][g]` for every class `c` and grid index `g`, restricted to the
/// validation sets of `targets`.
fn distance_grid(
    p: &Prepared<'_>,
    grid: &[usize],
    config: &SizingConfig,
) -> Result<Vec<Vec<ValidationDistances>>, SizingError> {
    let all: Vec<usize> = (0..p.labels.len()).collect();
    let mut out = Vec::with_capacity(all.len());
    for c in 0..p.labels.len() {
        let mut row = Vec::with_capacity(grid.len());
        for &k in grid {
            row.push(match sized_dictionary(p, c, k, config)? {
                Some(d) => Some(validation_distances(p, &d, &all)?),
                None => None,
            });
        }
        out.push(row);
    }
    Ok(out)
}

/// Whether a signal of class `own` goes to `other` in a two-way decision.
fn goes_to_other(d_own: f64, d_other: f64, own: &str, other: &str) -> bool {
    d_other < d_own || (d_other == d_own && other < own)
}

fn count_misses(own_d: &[f64], other_d: &[f64], own: &str, other: &str) -> usize {
    own_d
        .iter()
        .zip(other_d)
        .filter(|(a, b)| goes_to_other(**a, **b, own, other))
        .count()
}

fn build_matrix(
    p: &Prepared<'_>,
    dists: &[Vec<ValidationDistances>],
    a: usize,
    b: usize,
    grid: &[usize],
) -> ErrorMatrix {
    let (la, lb) = (p.labels[a], p.labels[b]);
    let g = grid.len();
    let mut errors = vec![vec![None; g]; g];
    for s in 0..g {
        for t in 0..g {
            if let (Some(da), Some(db)) = (&dists[a][s], &dists[b][t]) {
                let miss_a = count_misses(&da[&a], &db[&a], la, lb);
                let miss_b = count_misses(&db[&b], &da[&b], lb, la);
                errors[s][t] = Some(miss_a + miss_b);
            }
        }
    }
    ErrorMatrix {
        class_a: la.to_string(),
        class_b: lb.to_string(),
        grid: grid.to_vec(),
        errors,
        validation_counts: (p.splits[a].validation.cols(), p.splits[b].validation.cols()),
    }
}

/// Error matrix of one pair of classes.
pub fn pairwise_error_matrix(
    a: &LabeledSignals,
    b: &LabeledSignals,
    grid: &[usize],
    config: &SizingConfig,
) -> Result<ErrorMatrix, SizingError> {
    validate_grid(grid)?;
    let classes = [a.clone(), b.clone()];
    let p = prepare(&classes, config)?;
    let dists = distance_grid(&p, grid, config)?;
    Ok(build_matrix(&p, &dists, 0, 1, grid))
}

/// Error matrices of every unordered pair, ordered by class index; each
/// dictionary is trained once and shared across pairs.
pub fn error_matrices(
    classes: &[LabeledSignals],
    grid: &[usize],
    config: &SizingConfig,
) -> Result<Vec<ErrorMatrix>, SizingError> {
    validate_grid(grid)?;
    let p = prepare(classes, config)?;
    let dists = distance_grid(&p, grid, config)?;
    let n = classes.len();
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for a in 0..n {
        for b in (a + 1)..n {
            out.push(build_matrix(&p, &dists, a, b, grid));
        }
    }
    Ok(out)
}

/// Numerical rank of each class's training split.
pub fn numerical_ranks(
    classes: &[LabeledSignals],
    config: &SizingConfig,
) -> Result<BTreeMap<String, usize>, SizingError> {
    let p = prepare(classes, config)?;
    Ok(p.labels
        .iter()
        .zip(&p.splits)
        .map(|(l, s)| (l.to_string(), numerical_rank(&s.train, config.energy)))
        .collect())
}

/// `points` log-spaced integers from `lo` to `hi`, deduplicated.
pub fn log_spaced(lo: usize, hi: usize, points: usize) -> Vec<usize> {
    if hi <= lo || points <= 1 {
        return vec![lo];
    }
    let ratio = hi as f64 / lo as f64;
    let mut out: Vec<usize> = (0..points)
        .map(|i| (lo as f64 * ratio.powf(i as f64 / (points - 1) as f64)).round() as usize)
        .collect();
    out.dedup();
    out
}

/// Default grid: log-spaced from `grid_floor` up to the largest class
/// numerical rank, capped by the smallest training split.
pub fn default_grid(classes: &[LabeledSignals], config: &SizingConfig) -> Result<Vec<usize>, SizingError> {
    let p = prepare(classes, config)?;
    let cap = p
        .splits
        .iter()
        .map(|s| s.train.rows().min(s.train.cols()))
        .min()
        .expect("two or more classes");
    let top = p
        .splits
        .iter()
        .map(|s| numerical_rank(&s.train, config.energy))
        .max()
        .expect("two or more classes");
    let lo = config.grid_floor.clamp(1, cap);
    let hi = top.clamp(lo, cap);
    Ok(log_spaced(lo, hi, config.grid_points))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SearchStrategy {
    Exhaustive,
    CoordinateDescent,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SizeAssignment {
    pub sizes: BTreeMap<String, usize>,
    /// Sum over class pairs of the matrix entry at the chosen sizes.
    pub total_error: usize,
    pub strategy: SearchStrategy,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AgreementOptions {
    /// Starting sizes for the first descent run; snapped to the nearest grid
    /// value. Missing labels start at the smallest size.
    pub initial: BTreeMap<String, usize>,
    pub restarts: usize,
    pub seed: u64,
    /// Overrides the size-based choice of strategy.
    pub strategy: Option<SearchStrategy>,
}

impl Default for AgreementOptions {
    fn default() -> Self {
        Self {
            initial: BTreeMap::new(),
            restarts: 10,
            seed: 0,
            strategy: None,
        }
    }
}

/// Pair costs indexed by class position in label order.
struct Objective<'a> {
    labels: Vec<String>,
    grid: &'a [usize],
    /// `cost[i][j]` for `i < j`: rows are sizes of `i`, columns sizes of `j`.
    cost: Vec<Vec<Option<ErrorMatrix>>>,
}

type Key = (usize, usize, Vec<usize>);

impl<'a> Objective<'a> {
    fn new(matrices: &[ErrorMatrix], grid: &'a [usize]) -> Result<Self, SizingError> {
        validate_grid(grid)?;
        let labels: Vec<String> = matrices
            .iter()
            .flat_map(|m| [m.class_a.clone(), m.class_b.clone()])
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if labels.len() < 2 {
            return Err(SizingError::TooFewClasses(labels.len()));
        }
        let pos = |l: &str| labels.iter().position(|x| x == l).expect("collected above");
        let n = labels.len();
        let mut cost: Vec<Vec<Option<ErrorMatrix>>> = vec![vec![None; n]; n];
        for m in matrices {
            if m.grid != grid {
                return Err(SizingError::InvalidGrid(format!(
                    "matrix for {:?}/{:?} uses grid {:?}, expected {:?}",
                    m.class_a, m.class_b, m.grid, grid
                )));
            }
            if m.errors.len() != grid.len() || m.errors.iter().any(|r| r.len() != grid.len()) {
                return Err(SizingError::InvalidGrid(
                    "matrix shape does not match grid".into(),
                ));
            }
            let (a, b) = (pos(&m.class_a), pos(&m.class_b));
            if a == b {
                return Err(SizingError::DuplicateLabel(m.class_a.clone()));
            }
            let (i, j, oriented) = if a < b {
                (a, b, m.clone())
            } else {
                (b, a, m.transposed())
            };
            if cost[i][j].is_some() {
                return Err(SizingError::DuplicatePair(labels[i].clone(), labels[j].clone()));
            }
            cost[i][j] = Some(oriented);
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if cost[i][j].is_none() {
                    return Err(SizingError::MissingPair(labels[i].clone(), labels[j].clone()));
                }
            }
        }
        Ok(Self { labels, grid, cost })
    }

    fn cell(&self, i: usize, j: usize, s: usize, t: usize) -> Option<usize> {
        self.cost[i][j].as_ref().expect("validated")[s][t]
    }

    fn total(&self, idx: &[usize]) -> Option<usize> {
        let n = idx.len();
        let mut sum = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                sum += self.cell(i, j, idx[i], idx[j])?;
            }
        }
        Some(sum)
    }

    fn key(&self, idx: &[usize]) -> Option<Key> {
        let total = self.total(idx)?;
        let sizes: Vec<usize> = idx.iter().map(|&s| self.grid[s]).collect();
        Some((total, sizes.iter().sum(), sizes))
    }

    fn assignment(&self, idx: &[usize], strategy: SearchStrategy) -> SizeAssignment {
        SizeAssignment {
            sizes: self
                .labels
                .iter()
                .zip(idx)
                .map(|(l, &s)| (l.clone(), self.grid[s]))
                .collect(),
            total_error: self.total(idx).expect("feasible"),
            strategy,
        }
    }
}

impl std::ops::Index<usize> for ErrorMatrix {
    type Output = Vec<Option<usize>>;
    fn index(&self, s: usize) -> &Self::Output {
        &self.errors[s]
    }
}

/// Key comparison where `None` (infeasible) is worst.
fn better(a: &Option<Key>, b: &Option<Key>) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => x < y,
        (Some(_), None) => true,
        _ => false,
    }
}

fn exhaustive(obj: &Objective<'_>) -> Option<Vec<usize>> {
    let n = obj.labels.len();
    let g = obj.grid.len();
    // Per pair lower bounds: over everything, and over t for a fixed s.
    let mut min_all = vec![vec![None; n]; n];
    let mut min_row = vec![vec![Vec::new(); n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let rows: Vec<Option<usize>> = (0..g)
                .map(|s| (0..g).filter_map(|t| obj.cell(i, j, s, t)).min())
                .collect();
            min_all[i][j] = rows.iter().flatten().min().copied();
            min_row[i][j] = rows;
        }
    }

    struct Search<'s, 'o> {
        obj: &'s Objective<'o>,
        min_all: Vec<Vec<Option<usize>>>,
        min_row: Vec<Vec<Vec<Option<usize>>>>,
        best: Option<(Key, Vec<usize>)>,
        idx: Vec<usize>,
    }

    impl Search<'_, '_> {
        fn bound(&self, depth: usize, partial: usize) -> Option<usize> {
            let n = self.idx.len();
            let mut b = partial;
            for i in 0..n {
                for j in (i + 1)..n {
                    if j < depth {
                        continue;
                    }
                    b += if i < depth {
                        self.min_row[i][j][self.idx[i]]?
                    } else {
                        self.min_all[i][j]?
                    };
                }
            }
            Some(b)
        }

        fn go(&mut self, depth: usize, partial: usize) {
            let n = self.idx.len();
            if depth == n {
                let key = self.obj.key(&self.idx).expect("all cells feasible");
                if self.best.as_ref().is_none_or(|(k, _)| key < *k) {
                    self.best = Some((key, self.idx.clone()));
                }
                return;
            }
            for s in 0..self.obj.grid.len() {
                self.idx[depth] = s;
                let mut add = 0;
                let mut feasible = true;
                for i in 0..depth {
                    match self.obj.cell(i, depth, self.idx[i], s) {
                        Some(v) => add += v,
                        None => {
                            feasible = false;
                            break;
                        }
                    }
                }
                if !feasible {
                    continue;
                }
                let p = partial + add;
                match self.bound(depth + 1, p) {
                    None => continue,
                    Some(b) if self.best.as_ref().is_some_and(|(k, _)| b > k.0) => continue,
                    _ => {}
                }
                self.go(depth + 1, p);
            }
            self.idx[depth] = 0;
        }
    }

    let mut search = Search {
        obj,
        min_all,
        min_row,
        best: None,
        idx: vec![0; n],
    };
    search.go(0, 0);
    search.best.map(|(_, idx)| idx)
}

fn nearest_index(grid: &[usize], k: usize) -> usize {
    (0..grid.len())
        .min_by_key(|&s| (grid[s].abs_diff(k), grid[s]))
        .expect("nonempty grid")
}

fn descend(obj: &Objective<'_>, mut idx: Vec<usize>) -> (Option<Key>, Vec<usize>) {
    let mut key = obj.key(&idx);
    let max_passes = 100 * obj.labels.len().max(1);
    for _ in 0..max_passes {
        let mut changed = false;
        for c in 0..idx.len() {
            let current = idx[c];
            let mut best_s = current;
            for s in 0..obj.grid.len() {
                if s == current {
                    continue;
                }
                idx[c] = s;
                let k = obj.key(&idx);
                if better(&k, &key) {
                    key = k;
                    best_s = s;
                }
            }
            idx[c] = best_s;
            changed |= best_s != current;
        }
        if !changed {
            break;
        }
    }
    (key, idx)
}

fn coordinate_descent(obj: &Objective<'_>, options: &AgreementOptions) -> Option<Vec<usize>> {
    let n = obj.labels.len();
    let g = obj.grid.len();
    let start: Vec<usize> = obj
        .labels
        .iter()
        .map(|l| options.initial.get(l).map_or(0, |&k| nearest_index(obj.grid, k)))
        .collect();
    let mut best = descend(obj, start);
    for r in 1..options.restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive_index(options.seed, r as u64));
        let start: Vec<usize> = (0..n).map(|_| rng.random_range(0..g)).collect();
        let cand = descend(obj, start);
        if better(&cand.0, &best.0) {
            best = cand;
        }
    }
    best.0.map(|_| best.1)
}

/// Picks one size per class minimizing the summed pairwise errors. Ties go
/// to the smaller sum of sizes, then to the lexicographically smaller size
/// list in label order.
pub fn find_optimal_agreement(
    matrices: &[ErrorMatrix],
    grid: &[usize],
) -> Result<SizeAssignment, SizingError> {
    find_optimal_agreement_with(matrices, grid, &AgreementOptions::default())
}

pub fn find_optimal_agreement_with(
    matrices: &[ErrorMatrix],
    grid: &[usize],
    options: &AgreementOptions,
) -> Result<SizeAssignment, SizingError> {
    let obj = Objective::new(matrices, grid)?;
    let strategy = options.strategy.unwrap_or(
        if obj.labels.len() <= EXHAUSTIVE_MAX_CLASSES && grid.len() <= EXHAUSTIVE_MAX_GRID {
            SearchStrategy::Exhaustive
        } else {
            SearchStrategy::CoordinateDescent
        },
    );
    let idx = match strategy {
        SearchStrategy::Exhaustive => exhaustive(&obj),
        SearchStrategy::CoordinateDescent => coordinate_descent(&obj, options),
    }
    .ok_or(SizingError::Infeasible)?;
    Ok(obj.assignment(&idx, strategy))
}

/// Validation outcome of a size assignment, trained from scratch.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AssignmentEvaluation {
    /// Sum of the two-way cross-misclassification counts over class pairs.
    pub pairwise_total: usize,
    /// Validation signals misclassified when all dictionaries compete.
    pub global_errors: usize,
    pub validation_signals: usize,
}

pub fn evaluate_assignment(
    classes: &[LabeledSignals],
    sizes: &BTreeMap<String, usize>,
    config: &SizingConfig,
) -> Result<AssignmentEvaluation, SizingError> {
    let p = prepare(classes, config)?;
    let n = classes.len();
    let all: Vec<usize> = (0..n).collect();
    let mut dists = Vec::with_capacity(n);
    for c in 0..n {
        let k = *sizes
            .get(p.labels[c])
            .ok_or_else(|| SizingError::MissingSize(p.labels[c].to_string()))?;
        let d = sized_dictionary(&p, c, k, config)?.ok_or(SizingError::Infeasible)?;
        dists.push(validation_distances(&p, &d, &all)?);
    }
    let mut pairwise_total = 0;
    for a in 0..n {
        for b in (a + 1)..n {
            pairwise_total += count_misses(&dists[a][&a], &dists[b][&a], p.labels[a], p.labels[b]);
            pairwise_total += count_misses(&dists[b][&b], &dists[a][&b], p.labels[b], p.labels[a]);
        }
    }
    // Labels are distinct; break ties by label order.
    let mut order: Vec<usize> = all.clone();
    order.sort_by_key(|&c| p.labels[c]);
    let mut global_errors = 0;
    let mut validation_signals = 0;
    for c in 0..n {
        let count = p.splits[c].validation.cols();
        validation_signals += count;
        for i in 0..count {
            let mut best = order[0];
            for &o in &order[1..] {
                if dists[o][&c][i] < dists[best][&c][i] {
                    best = o;
                }
            }
            if best != c {
                global_errors += 1;
            }
        }
    }
    Ok(AssignmentEvaluation {
        pairwise_total,
        global_errors,
        validation_signals,
    })
}

/// Result of the full size search.
#[derive(Clone, Debug)]
pub struct SizingOutcome {
    pub grid: Vec<usize>,
    pub matrices: Vec<ErrorMatrix>,
    pub assignment: SizeAssignment,
    pub evaluation: AssignmentEvaluation,
    pub numerical_ranks: BTreeMap<String, usize>,
}

/// Grid (default when `grid` is `None`), pairwise matrices, agreement and
/// a global re-evaluation of the chosen sizes.
pub fn search_sizes(
    classes: &[LabeledSignals],
    grid: Option<&[usize]>,
    config: &SizingConfig,
) -> Result<SizingOutcome, SizingError> {
    let grid = match grid {
        Some(g) => g.to_vec(),
        None => default_grid(classes, config)?,
    };
    let ranks = numerical_ranks(classes, config)?;
    let matrices = error_matrices(classes, &grid, config)?;
    let options = AgreementOptions {
        initial: ranks.clone(),
        seed: seed::derive(config.seed, "agreement"),
        ..AgreementOptions::default()
    };
    let assignment = find_optimal_agreement_with(&matrices, &grid, &options)?;
    let evaluation = evaluate_assignment(classes, &assignment.sizes, config)?;
    Ok(SizingOutcome {
        grid,
        matrices,
        assignment,
        evaluation,
        numerical_ranks: ranks,
    })
}
