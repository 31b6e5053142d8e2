//! Randomized LU dictionaries for byte-content classification.
//!
//! Raw bytes become fixed-length feature vectors ([`features`]), each class
//! gets a dictionary from a randomized LU of its training matrix
//! ([`randomized_lu`], [`dictionary`]), dictionary sizes are picked by a
//! pairwise agreement search ([`sizing`]), and trained sets persist as
//! checksummed bundles ([`archive`]).

pub mod archive;
pub mod dictionary;
pub mod dump;
pub mod features;
pub mod linalg;
pub mod randomized_lu;
pub mod seed;
pub mod sizing;

pub use dictionary::{
    classify_fragments, classify_signal, detect_embedded, dist, train, ClassificationReport, Dictionary,
    DictionaryError, DictionarySet, EmbeddedDetection, TrainingOptions,
};
pub use features::{sample_fragments, FeatureError, FeatureScheme, FeatureVector, FragmentSpec};
pub use linalg::{DenseMatrix, MatrixError, Permutation};
pub use randomized_lu::{
    error_bound, randomized_lu, success_probability, BoundParameters, RandomizedLu, RandomizedLuError,
};
