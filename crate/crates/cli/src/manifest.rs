//! Corpus manifests: which file belongs to which class and split.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use crate::error::invalid;

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Relative to the manifest root.
    pub path: String,
    pub label: String,
    pub split: Split,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub format_version: u32,
    /// Resolved against the manifest's directory when relative.
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl CorpusManifest {
    pub fn new(root: impl Into<PathBuf>, entries: Vec<ManifestEntry>) -> Self {
        Self {
            format_version: MANIFEST_VERSION,
            root: root.into(),
            entries,
        }
    }

    /// Checks labels and path uniqueness; with `check_files`, also that every
    /// entry exists.
    pub fn validate(&self, check_files: bool) -> Result<()> {
        if self.format_version != MANIFEST_VERSION {
            return Err(invalid(format!(
                "unsupported manifest version {}",
                self.format_version
            )));
        }
        let mut seen = BTreeSet::new();
        for e in &self.entries {
            if e.label.trim().is_empty() {
                return Err(invalid(format!("entry {:?} has an empty label", e.path)));
            }
            if !seen.insert(e.path.as_str()) {
                return Err(invalid(format!("duplicate manifest path {:?}", e.path)));
            }
            if check_files && !self.resolve(e).is_file() {
                return Err(invalid(format!(
                    "manifest entry {:?} not found at {}",
                    e.path,
                    self.resolve(e).display()
                )));
            }
        }
        Ok(())
    }

    pub fn resolve(&self, e: &ManifestEntry) -> PathBuf {
        self.root.join(&e.path)
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    pub fn labels(&self, split: Split) -> BTreeSet<&str> {
        self.split(split).map(|e| e.label.as_str()).collect()
    }

    /// Entries of a split grouped by label, each group in manifest order.
    pub fn by_label(&self, split: Split) -> BTreeMap<&str, Vec<&ManifestEntry>> {
        let mut out: BTreeMap<&str, Vec<&ManifestEntry>> = BTreeMap::new();
        for e in self.split(split) {
            out.entry(e.label.as_str()).or_default().push(e);
        }
        out
    }

    /// Loads, resolves a relative root against the manifest's directory and
    /// validates, including file existence.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text =
            fs::read_to_string(path).with_context(|| format!("reading manifest {}", path.display()))?;
        let mut m: Self = serde_json::from_str(&text)
            .map_err(|e| invalid(format!("parsing manifest {}: {e}", path.display())))?;
        if m.root.is_relative() {
            let dir = path.parent().unwrap_or_else(|| Path::new("."));
            m.root = if m.root == Path::new(".") {
                dir.to_path_buf()
            } else {
                dir.join(&m.root)
            };
        }
        m.validate(true)?;
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text + "\n").with_context(|| format!("writing manifest {}", path.display()))
    }
}
