//! Confusion matrices with predicted classes as rows and actual classes as
//! columns.

use std::collections::BTreeMap;

use anyhow::Result;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    /// `counts[predicted][actual]`.
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn new(labels: impl IntoIterator<Item = String>) -> Self {
        let mut labels: Vec<String> = labels.into_iter().collect();
        labels.sort();
        labels.dedup();
        let n = labels.len();
        Self {
            labels,
            counts: vec![vec![0; n]; n],
        }
    }

    fn index(&mut self, label: &str) -> usize {
        match self.labels.binary_search_by(|l| l.as_str().cmp(label)) {
            Ok(i) => i,
            Err(i) => {
                self.labels.insert(i, label.to_string());
                for row in &mut self.counts {
                    row.insert(i, 0);
                }
                let n = self.labels.len();
                self.counts.insert(i, vec![0; n]);
                i
            }
        }
    }

    /// Unknown labels extend the matrix.
    pub fn record(&mut self, actual: &str, predicted: &str) {
        let a = self.index(actual);
        let p = self.index(predicted);
        self.counts[p][a] += 1;
    }

    pub fn column_totals(&self) -> Vec<usize> {
        (0..self.labels.len())
            .map(|a| self.counts.iter().map(|row| row[a]).sum())
            .collect()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> usize {
        (0..self.labels.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            t => self.correct() as f64 / t as f64,
        }
    }

    /// Fraction of each actual class predicted correctly; classes with no
    /// test files are omitted.
    pub fn per_class_accuracy(&self) -> BTreeMap<String, f64> {
        let totals = self.column_totals();
        self.labels
            .iter()
            .enumerate()
            .filter(|(i, _)| totals[*i] > 0)
            .map(|(i, l)| (l.clone(), self.counts[i][i] as f64 / totals[i] as f64))
            .collect()
    }

    /// Header of actual labels, one row per predicted label, then a totals
    /// row.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["predicted\\actual".to_string()];
        header.extend(self.labels.iter().cloned());
        w.write_record(&header)?;
        for (label, row) in self.labels.iter().zip(&self.counts) {
            let mut rec = vec![label.clone()];
            rec.extend(row.iter().map(usize::to_string));
            w.write_record(&rec)?;
        }
        let mut totals = vec!["total".to_string()];
        totals.extend(self.column_totals().iter().map(usize::to_string));
        w.write_record(&totals)?;
        Ok(String::from_utf8(w.into_inner()?)?)
    }

    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Report<'a> {
            labels: &'a [String],
            counts: &'a [Vec<usize>],
            column_totals: Vec<usize>,
            accuracy: f64,
            per_class_accuracy: BTreeMap<String, f64>,
        }
        Ok(serde_json::to_string_pretty(&Report {
            labels: &self.labels,
            counts: &self.counts,
            column_totals: self.column_totals(),
            accuracy: self.accuracy(),
            per_class_accuracy: self.per_class_accuracy(),
        })?)
    }

    /// Plain-text table for the terminal.
    pub fn render(&self) -> String {
        let width = self.labels.iter().map(String::len).max().unwrap_or(0).max(6) + 2;
        let mut out = format!("{:>width$}", "pred\\act");
        for l in &self.labels {
            out.push_str(&format!("{l:>width$}"));
        }
        out.push('\n');
        for (l, row) in self.labels.iter().zip(&self.counts) {
            out.push_str(&format!("{l:>width$}"));
            for c in row {
                out.push_str(&format!("{c:>width$}"));
            }
            out.push('\n');
        }
        out
    }
}
