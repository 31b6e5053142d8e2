//! Corpus-level drivers shared by the commands and the acceptance suite.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{Context, Result};
use ludict_core::dictionary::{
    classify_columns, detect_embedded_columns, train, DictionarySet, TrainingOptions,
};
use ludict_core::dump::FeatureRecord;
use ludict_core::features::{sample_fragments, FeatureScheme, FragmentSpec};
use ludict_core::linalg::DenseMatrix;
use ludict_core::randomized_lu::DEFAULT_OVERSAMPLING;
use ludict_core::seed;
use ludict_core::sizing::{search_sizes, LabeledSignals, SizingConfig, SizingOutcome};
use rayon::prelude::*;
use serde::Serialize;

use crate::confusion::ConfusionMatrix;
use crate::error::invalid;
use crate::manifest::{CorpusManifest, Split};

/// Size of the single training fragment drawn from each training file.
pub const TRAIN_FRAGMENT_BYTES: usize = 10 * 1024;

/// How signals are cut from a file.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Extraction {
    WholeFile,
    Fragments { count: usize, bytes: usize },
}

impl Extraction {
    pub fn fragments(count: usize, bytes: usize) -> Result<Self> {
        FragmentSpec::new(count, bytes, 0)?;
        Ok(Self::Fragments { count, bytes })
    }
}

/// Feature vectors of one file.
#[derive(Clone, Debug, PartialEq)]
pub struct FileFeatures {
    pub offsets: Vec<u64>,
    pub vectors: Vec<Vec<f64>>,
    /// The file was shorter than one fragment and was used whole.
    pub file_too_small: bool,
}

/// Seed of the fragment draw for the file at manifest path `key`.
pub fn fragment_seed(root: u64, key: &str) -> u64 {
    seed::derive(seed::derive(root, "fragments"), key)
}

/// Whole-file extraction only supports BFD+CDD.
pub fn extract_file(
    bytes: &[u8],
    scheme: FeatureScheme,
    extraction: Extraction,
    seed: u64,
) -> Result<FileFeatures> {
    match extraction {
        Extraction::WholeFile if scheme != FeatureScheme::BfdCdd => Err(invalid(format!(
            "whole-file features use bfd-cdd, not {}; sample fragments instead",
            scheme.tag()
        ))),
        Extraction::WholeFile => Ok(FileFeatures {
            offsets: vec![0],
            vectors: vec![scheme.extract(bytes)?.values],
            file_too_small: false,
        }),
        Extraction::Fragments { count, bytes: len } => {
            let spec = FragmentSpec::new(count, len, seed)?;
            let sampled = sample_fragments(bytes, &spec);
            let vectors = sampled
                .fragments
                .iter()
                .map(|f| Ok(scheme.extract(f.bytes)?.values))
                .collect::<Result<Vec<_>>>()?;
            Ok(FileFeatures {
                offsets: sampled.fragments.iter().map(|f| f.offset as u64).collect(),
                vectors,
                file_too_small: sampled.file_too_small,
            })
        }
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("reading {}", path.display()))
}

/// A file to process, with the key used for its fragment seed and its
/// label when known.
#[derive(Clone, Debug)]
pub struct InputFile {
    pub path: PathBuf,
    pub key: String,
    pub label: Option<String>,
}

pub fn manifest_inputs(manifest: &CorpusManifest, split: Split) -> Vec<InputFile> {
    manifest
        .split(split)
        .map(|e| InputFile {
            path: manifest.resolve(e),
            key: e.path.clone(),
            label: Some(e.label.clone()),
        })
        .collect()
}

pub fn path_inputs(paths: &[PathBuf]) -> Vec<InputFile> {
    paths
        .iter()
        .map(|p| InputFile {
            path: p.clone(),
            key: p.to_string_lossy().into_owned(),
            label: None,
        })
        .collect()
}

fn extract_input(
    f: &InputFile,
    scheme: FeatureScheme,
    extraction: Extraction,
    root: u64,
) -> Result<FileFeatures> {
    extract_file(&read(&f.path)?, scheme, extraction, fragment_seed(root, &f.key))
        .with_context(|| format!("extracting features from {}", f.path.display()))
}

/// One dump record per extracted signal, in input order.
pub fn feature_records(
    inputs: &[InputFile],
    scheme: FeatureScheme,
    extraction: Extraction,
    root: u64,
) -> Result<Vec<FeatureRecord>> {
    let per_file = inputs
        .par_iter()
        .map(|f| {
            let feats = extract_input(f, scheme, extraction, root)?;
            Ok(feats
                .offsets
                .into_iter()
                .zip(feats.vectors)
                .map(|(offset, values)| FeatureRecord {
                    scheme,
                    path: f.key.clone(),
                    offset,
                    values,
                })
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_file.into_iter().flatten().collect())
}

/// Training signals per class, classes in label order.
pub fn training_signals(
    manifest: &CorpusManifest,
    scheme: FeatureScheme,
    extraction: Extraction,
    root: u64,
) -> Result<Vec<LabeledSignals>> {
    let groups = manifest.by_label(Split::Train);
    if groups.len() < 2 {
        return Err(invalid(format!(
            "training needs at least 2 labels, the manifest has {}",
            groups.len()
        )));
    }
    groups
        .into_iter()
        .map(|(label, entries)| {
            let vectors: Vec<Vec<f64>> = entries
                .par_iter()
                .map(|e| {
                    let f = InputFile {
                        path: manifest.resolve(e),
                        key: e.path.clone(),
                        label: None,
                    };
                    extract_input(&f, scheme, extraction, root).map(|x| x.vectors)
                })
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .flatten()
                .collect();
            Ok(LabeledSignals::new(label, DenseMatrix::from_columns(&vectors)?))
        })
        .collect()
}

/// Dictionary sizes requested on the command line.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SizeSpec {
    /// Search over the given grid, or the default one.
    Auto(Option<Vec<usize>>),
    Uniform(usize),
    PerClass(BTreeMap<String, usize>),
}

impl FromStr for SizeSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "auto" {
            return Ok(Self::Auto(None));
        }
        let parse = |v: &str| -> Result<usize, String> {
            match v.trim().parse::<usize>() {
                Ok(0) | Err(_) => Err(format!("invalid dictionary size {v:?}")),
                Ok(k) => Ok(k),
            }
        };
        if s.contains('=') {
            let mut map = BTreeMap::new();
            for part in s.split(',') {
                let (label, k) = part
                    .split_once('=')
                    .ok_or_else(|| format!("expected label=size, got {part:?}"))?;
                if map.insert(label.trim().to_string(), parse(k)?).is_some() {
                    return Err(format!("size given twice for {label:?}"));
                }
            }
            return Ok(Self::PerClass(map));
        }
        let list = s.split(',').map(parse).collect::<Result<Vec<_>, _>>()?;
        match list.as_slice() {
            [k] => Ok(Self::Uniform(*k)),
            _ => {
                let mut grid = list;
                grid.sort_unstable();
                grid.dedup();
                Ok(Self::Auto(Some(grid)))
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainSettings {
    pub scheme: FeatureScheme,
    pub sizes: SizeSpec,
    pub oversampling: usize,
    pub seed: u64,
    pub extraction: Extraction,
}

impl TrainSettings {
    pub fn new(scheme: FeatureScheme, sizes: SizeSpec, seed: u64) -> Self {
        Self {
            scheme,
            sizes,
            oversampling: DEFAULT_OVERSAMPLING,
            seed,
            extraction: Extraction::Fragments {
                count: 1,
                bytes: TRAIN_FRAGMENT_BYTES,
            },
        }
    }

    pub fn sizing_config(&self) -> SizingConfig {
        SizingConfig {
            seed: seed::derive(self.seed, "sizing"),
            oversampling: self.oversampling,
            ..SizingConfig::default()
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub dictionaries: DictionarySet,
    pub sizes: BTreeMap<String, usize>,
    pub sizing: Option<SizingOutcome>,
}

/// Resolves sizes (searching when requested) and trains on all signals.
pub fn train_from_signals(classes: &[LabeledSignals], settings: &TrainSettings) -> Result<TrainOutcome> {
    let (sizes, sizing) = match &settings.sizes {
        SizeSpec::Uniform(k) => (classes.iter().map(|c| (c.label.clone(), *k)).collect(), None),
        SizeSpec::PerClass(map) => {
            for c in classes {
                if !map.contains_key(&c.label) {
                    return Err(invalid(format!(
                        "no dictionary size given for class {:?}",
                        c.label
                    )));
                }
            }
            (map.clone(), None)
        }
        SizeSpec::Auto(grid) => {
            let out = search_sizes(classes, grid.as_deref(), &settings.sizing_config())?;
            (out.assignment.sizes.clone(), Some(out))
        }
    };
    let dictionaries = train(
        classes.iter().map(|c| (c.label.as_str(), &c.signals)),
        &sizes,
        settings.scheme,
        TrainingOptions {
            oversampling: settings.oversampling,
            seed: settings.seed,
        },
    )?;
    Ok(TrainOutcome {
        dictionaries,
        sizes,
        sizing,
    })
}

pub fn train_manifest(manifest: &CorpusManifest, settings: &TrainSettings) -> Result<TrainOutcome> {
    let classes = training_signals(manifest, settings.scheme, settings.extraction, settings.seed)?;
    train_from_signals(&classes, settings)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FileReport {
    pub path: String,
    pub actual: Option<String>,
    pub predicted: String,
    pub distances: BTreeMap<String, f64>,
    pub margin: f64,
    pub fragments: usize,
    pub file_too_small: bool,
}

fn classify_input(
    f: &InputFile,
    set: &DictionarySet,
    extraction: Extraction,
    root: u64,
) -> Result<FileReport> {
    let scheme = set
        .scheme()
        .ok_or_else(|| invalid("the bundle holds no dictionaries"))?;
    let feats = extract_input(f, scheme, extraction, root)?;
    let x = DenseMatrix::from_columns(&feats.vectors)?;
    let r = classify_columns(&x, set).with_context(|| format!("classifying {}", f.path.display()))?;
    Ok(FileReport {
        path: f.key.clone(),
        actual: f.label.clone(),
        predicted: r.predicted,
        distances: r.distances,
        margin: r.margin,
        fragments: feats.vectors.len(),
        file_too_small: feats.file_too_small,
    })
}

/// Classifies every input; reports come back in input order.
pub fn classify_inputs(
    inputs: &[InputFile],
    set: &DictionarySet,
    extraction: Extraction,
    root: u64,
) -> Result<Vec<FileReport>> {
    inputs
        .par_iter()
        .map(|f| classify_input(f, set, extraction, root))
        .collect()
}

/// Confusion matrix over the reports that carry an actual label.
pub fn confusion(reports: &[FileReport], set: &DictionarySet) -> ConfusionMatrix {
    let mut m = ConfusionMatrix::new(set.labels().map(str::to_string));
    for r in reports {
        if let Some(actual) = &r.actual {
            m.record(actual, &r.predicted);
        }
    }
    m
}

pub fn classify_manifest(
    manifest: &CorpusManifest,
    set: &DictionarySet,
    extraction: Extraction,
    root: u64,
) -> Result<(ConfusionMatrix, Vec<FileReport>)> {
    let reports = classify_inputs(&manifest_inputs(manifest, Split::Test), set, extraction, root)?;
    Ok((confusion(&reports, set), reports))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanFile {
    pub path: String,
    pub label: Option<String>,
    pub fragments: usize,
    pub payload_fragments: usize,
    pub flagged: bool,
    pub file_too_small: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanSummary {
    pub positives: usize,
    pub detected: usize,
    pub negatives: usize,
    pub false_alarms: usize,
    pub detection_rate: f64,
    pub false_alarm_rate: f64,
}

pub fn scan_inputs(
    inputs: &[InputFile],
    set: &DictionarySet,
    payload: &str,
    threshold: usize,
    extraction: Extraction,
    root: u64,
) -> Result<Vec<ScanFile>> {
    if set.get(payload).is_none() {
        return Err(invalid(format!("payload label {payload:?} is not in the bundle")));
    }
    let scheme = set.scheme().expect("nonempty set");
    inputs
        .par_iter()
        .map(|f| {
            let feats = extract_input(f, scheme, extraction, root)?;
            let x = DenseMatrix::from_columns(&feats.vectors)?;
            let d = detect_embedded_columns(&x, set, payload, threshold)
                .with_context(|| format!("scanning {}", f.path.display()))?;
            Ok(ScanFile {
                path: f.key.clone(),
                label: f.label.clone(),
                fragments: feats.vectors.len(),
                payload_fragments: d.payload_fragments,
                flagged: d.flagged,
                file_too_small: feats.file_too_small,
            })
        })
        .collect()
}

/// Detection and false-alarm rates over labeled files; a file is a positive
/// when its label is the payload label.
pub fn summarize_scan(files: &[ScanFile], payload: &str) -> Option<ScanSummary> {
    let labeled: Vec<&ScanFile> = files.iter().filter(|f| f.label.is_some()).collect();
    if labeled.is_empty() {
        return None;
    }
    let is_pos = |f: &&ScanFile| f.label.as_deref() == Some(payload);
    let positives = labeled.iter().filter(|f| is_pos(f)).count();
    let negatives = labeled.len() - positives;
    let detected = labeled.iter().filter(|f| is_pos(f) && f.flagged).count();
    let false_alarms = labeled.iter().filter(|f| !is_pos(f) && f.flagged).count();
    let rate = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    Some(ScanSummary {
        positives,
        detected,
        negatives,
        false_alarms,
        detection_rate: rate(detected, positives),
        false_alarm_rate: rate(false_alarms, negatives),
    })
}
