//! Feature tables, domain splits, run configuration and the synthetic
//! covariate-shift generator.

mod config;
mod split;
mod synth;
mod table;

use ndarray::Array2;

use crate::error::{Error, Result};

pub use config::{Ablation, RunConfig};
pub use split::{loso_splits, split_for_subject, DomainSplit};
pub use synth::{make_synthetic_dataset, SyntheticSpec};
pub use table::{load_feature_table, save_feature_table};

/// One window of one trial, already reduced to a feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecord {
    pub subject_id: u32,
    pub trial_id: u32,
    pub window_id: u32,
    pub features: Vec<f64>,
    pub label: Option<usize>,
}

/// Ordered, validated collection of records sharing one feature width.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    records: Vec<FeatureRecord>,
    dim: usize,
    num_classes: usize,
}

impl FeatureTable {
    pub fn new(records: Vec<FeatureRecord>, dim: usize, num_classes: usize) -> Result<Self> {
        if num_classes == 0 {
            return Err(Error::InvalidInput("num_classes must be at least 1".into()));
        }
        for (i, r) in records.iter().enumerate() {
            if r.features.len() != dim {
                return Err(Error::InvalidInput(format!(
                    "record {i} has {} features, table dim is {dim}",
                    r.features.len()
                )));
            }
            if let Some(bad) = r.features.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "record {i} feature {bad} is not finite"
                )));
            }
            if let Some(l) = r.label {
                if l >= num_classes {
                    return Err(Error::InvalidInput(format!(
                        "record {i} label {l} >= num_classes {num_classes}"
                    )));
                }
            }
        }
        Ok(Self {
            records,
            dim,
            num_classes,
        })
    }

    pub fn records(&self) -> &[FeatureRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<FeatureRecord> {
        self.records
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn is_fully_labeled(&self) -> bool {
        self.records.iter().all(|r| r.label.is_some())
    }

    /// Distinct subject ids in ascending order.
    pub fn subjects(&self) -> Vec<u32> {
        let mut s: Vec<u32> = self.records.iter().map(|r| r.subject_id).collect();
        s.sort_unstable();
        s.dedup();
        s
    }

    /// Labels of every record; errors if any is missing.
    pub fn labels(&self) -> Result<Vec<usize>> {
        self.records
            .iter()
            .enumerate()
            .map(|(i, r)| {
                r.label
                    .ok_or_else(|| Error::InvalidInput(format!("record {i} is unlabeled")))
            })
            .collect()
    }

    /// Row-major `[len × dim]` feature matrix.
    pub fn feature_matrix(&self) -> Array2<f64> {
        let mut m = Array2::zeros((self.records.len(), self.dim));
        for (mut row, r) in m.rows_mut().into_iter().zip(&self.records) {
            for (dst, &src) in row.iter_mut().zip(&r.features) {
                *dst = src;
            }
        }
        m
    }

    /// Same records with every label removed.
    pub fn without_labels(&self) -> FeatureTable {
        let records = self
            .records
            .iter()
            .map(|r| FeatureRecord {
                label: None,
                ..r.clone()
            })
            .collect();
        FeatureTable {
            records,
            dim: self.dim,
            num_classes: self.num_classes,
        }
    }

    /// Returns a table with every feature vector replaced by `f(features)`.
    pub fn map_features<F>(&self, mut f: F) -> FeatureTable
    where
        F: FnMut(&[f64]) -> Vec<f64>,
    {
        let records: Vec<FeatureRecord> = self
            .records
            .iter()
            .map(|r| FeatureRecord {
                features: f(&r.features),
                ..r.clone()
            })
            .collect();
        let dim = records.first().map_or(self.dim, |r| r.features.len());
        FeatureTable {
            records,
            dim,
            num_classes: self.num_classes,
        }
    }
}

/// Per-feature standardization (z-score) fitted on one table.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Population mean and std per column; zero-variance columns get scale 1.
    pub fn fit(table: &FeatureTable) -> Result<Self> {
        if table.is_empty() {
            return Err(Error::InvalidInput(
                "cannot fit standardizer on empty table".into(),
            ));
        }
        let n = table.len() as f64;
        let d = table.dim();
        let mut mean = vec![0.0; d];
        for r in table.records() {
            for (m, v) in mean.iter_mut().zip(&r.features) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in table.records() {
            for ((s, v), m) in var.iter_mut().zip(&r.features).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, scale })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn transform(&self, table: &FeatureTable) -> FeatureTable {
        table.map_features(|f| self.transform_row(f))
    }
}
