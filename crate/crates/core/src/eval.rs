//! Accuracy and confusion matrices, leave-one-subject-out runs, the ablation
//! study, mutual-information topography and embedding export.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::ArrayView2;
use rayon::prelude::*;
use serde::Serialize;

use crate::datamodel::{loso_splits, Ablation, FeatureTable, RunConfig};
use crate::error::{Error, Result};
use crate::net::{self, Checkpoint, MlpParams, Mode};
use crate::trainer::{self, EpochLog};

/// Rows are true classes, columns predictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn new(num_classes: usize) -> Self {
        Self {
            counts: vec![vec![0; num_classes]; num_classes],
        }
    }

    pub fn record(&mut self, truth: usize, predicted: usize) {
        self.counts[truth][predicted] += 1;
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> usize {
        (0..self.counts.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        self.trace() as f64 / self.total().max(1) as f64
    }

    pub fn row_sums(&self) -> Vec<usize> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }
}

/// Arg max per row, ties to the lowest index.
pub fn argmax_rows(probs: ArrayView2<f64>) -> Vec<usize> {
    probs
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (c, &p) in row.iter().enumerate() {
                if p > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

pub fn confusion_from_predictions(
    truth: &[usize],
    predicted: &[usize],
    num_classes: usize,
) -> Result<ConfusionMatrix> {
    if truth.len() != predicted.len() {
        return Err(Error::shape(
            format!("{} predictions", truth.len()),
            predicted.len(),
        ));
    }
    if truth.is_empty() {
        return Err(Error::InvalidInput("cannot evaluate an empty set".into()));
    }
    let mut m = ConfusionMatrix::new(num_classes);
    for (&t, &p) in truth.iter().zip(predicted) {
        if t >= num_classes || p >= num_classes {
            return Err(Error::InvalidInput(format!(
                "class index out of range ({t}, {p}) for {num_classes} classes"
            )));
        }
        m.record(t, p);
    }
    Ok(m)
}

/// Eval-mode accuracy of `params` on already-preprocessed rows.
pub fn evaluate_matrix(
    params: &MlpParams,
    x: ArrayView2<f64>,
    labels: &[usize],
    num_classes: usize,
) -> Result<(f64, ConfusionMatrix)> {
    let cache = net::forward(params, x, Mode::Eval, 0.0, None)?;
    let m = confusion_from_predictions(labels, &argmax_rows(cache.probs.view()), num_classes)?;
    Ok((m.accuracy(), m))
}

/// Accuracy and confusion of a saved model on a labeled table.
pub fn evaluate(model: &Checkpoint, table: &FeatureTable) -> Result<(f64, ConfusionMatrix)> {
    let labels = table.labels()?;
    let cache = model.forward_eval(table.feature_matrix().view())?;
    let m = confusion_from_predictions(
        &labels,
        &argmax_rows(cache.probs.view()),
        model.params.num_classes(),
    )?;
    Ok((m.accuracy(), m))
}

/// Worse than chance: `accuracy < 1/C`.
pub fn detect_negative_transfer(accuracy: f64, num_classes: usize) -> bool {
    accuracy < 1.0 / num_classes as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldReport {
    pub target_subject: u32,
    pub accuracy: f64,
    pub negative_transfer: bool,
    pub confusion: ConfusionMatrix,
    pub epochs: Vec<EpochLog>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub num_classes: usize,
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    /// Population standard deviation over folds.
    pub std_accuracy: f64,
    pub negative_transfer_count: usize,
    pub folds: Vec<FoldReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mi_topography: Option<MiTensor>,
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl RunReport {
    pub fn from_folds(num_classes: usize, folds: Vec<FoldReport>) -> Self {
        let fold_accuracies: Vec<f64> = folds.iter().map(|f| f.accuracy).collect();
        let (mean_accuracy, std_accuracy) = mean_std(&fold_accuracies);
        Self {
            num_classes,
            negative_transfer_count: folds.iter().filter(|f| f.negative_transfer).count(),
            fold_accuracies,
            mean_accuracy,
            std_accuracy,
            folds,
            mi_topography: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }
}

fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if jobs <= 1 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot start {jobs} workers: {e}")))?;
    Ok(pool.install(f))
}

/// Fits every leave-one-subject-out fold, `jobs` at a time. Fold results are
/// independent, so the report does not depend on `jobs`.
pub fn loso_run(table: &FeatureTable, config: &RunConfig, jobs: usize) -> Result<RunReport> {
    config.validate()?;
    let splits = loso_splits(table)?;
    let c = table.num_classes();
    let folds: Vec<FoldReport> = with_jobs(jobs, || {
        splits
            .par_iter()
            .map(|split| {
                let out = trainer::fit(split, config)?;
                Ok(FoldReport {
                    target_subject: split.target_subject,
                    accuracy: out.target_accuracy,
                    negative_transfer: detect_negative_transfer(out.target_accuracy, c),
                    confusion: out.confusion,
                    epochs: out.epochs,
                })
            })
            .collect::<Result<Vec<_>>>()
    })??;
    Ok(RunReport::from_folds(c, folds))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    pub name: String,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub fold_accuracies: Vec<f64>,
    pub negative_transfer_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    pub fn row(&self, name: &str) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }
}

/// Runs `variants` (each a full LOSO) on top of `config`.
pub fn ablation_study(
    table: &FeatureTable,
    config: &RunConfig,
    variants: &[Ablation],
    jobs: usize,
) -> Result<AblationReport> {
    let mut rows = Vec::with_capacity(variants.len());
    for &v in variants {
        let r = loso_run(table, &v.apply(config), jobs)?;
        rows.push(AblationRow {
            name: v.name().to_string(),
            mean_accuracy: r.mean_accuracy,
            std_accuracy: r.std_accuracy,
            fold_accuracies: r.fold_accuracies,
            negative_transfer_count: r.negative_transfer_count,
        });
    }
    Ok(AblationReport { rows })
}

/// Mutual information, `[classes × bands × channels]`, min-max scaled.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MiTensor {
    pub classes: usize,
    pub bands: usize,
    pub channels: usize,
    /// Row-major over (class, band, channel).
    pub values: Vec<f64>,
}

impl MiTensor {
    pub fn get(&self, class: usize, band: usize, channel: usize) -> f64 {
        self.values[(class * self.bands + band) * self.channels + channel]
    }

    /// `class,band,channel,value` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("class,band,channel,value\n");
        for c in 0..self.classes {
            for b in 0..self.bands {
                for ch in 0..self.channels {
                    let _ = writeln!(s, "{c},{b},{ch},{:.16e}", self.get(c, b, ch));
                }
            }
        }
        s
    }
}

/// Number of equal-width bins used on each variable.
pub const MI_BINS: usize = 10;

fn bin_indices(values: &[f64], bins: usize) -> Vec<usize> {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    let width = hi - lo;
    values
        .iter()
        .map(|&v| {
            if width > 0.0 {
                (((v - lo) / width * bins as f64) as usize).min(bins - 1)
            } else {
                0
            }
        })
        .collect()
}

/// Discrete mutual information in nats after equal-width binning of both
/// variables. Constant inputs give 0.
pub fn binned_mutual_information(x: &[f64], y: &[f64], bins: usize) -> f64 {
    let n = x.len().min(y.len());
    if n == 0 || bins == 0 {
        return 0.0;
    }
    let bx = bin_indices(&x[..n], bins);
    let by = bin_indices(&y[..n], bins);
    let mut joint = vec![0usize; bins * bins];
    let mut px = vec![0usize; bins];
    let mut py = vec![0usize; bins];
    for (&i, &j) in bx.iter().zip(&by) {
        joint[i * bins + j] += 1;
        px[i] += 1;
        py[j] += 1;
    }
    let nf = n as f64;
    let mut mi = 0.0;
    for i in 0..bins {
        for j in 0..bins {
            let c = joint[i * bins + j];
            if c > 0 {
                let pxy = c as f64 / nf;
                mi += pxy * (pxy / ((px[i] as f64 / nf) * (py[j] as f64 / nf))).ln();
            }
        }
    }
    mi.max(0.0)
}

/// MI between every feature column and every class-probability column,
/// scaled to [0, 1] by the global min and max. Feature `channel·bands + band`
/// maps to cell `(class, band, channel)`.
pub fn mi_topography(
    features: &FeatureTable,
    probs: ArrayView2<f64>,
    bands: usize,
    channels: usize,
) -> Result<MiTensor> {
    if bands == 0 || channels == 0 || features.dim() != bands * channels {
        return Err(Error::shape(
            format!("feature dim {bands}×{channels}"),
            features.dim(),
        ));
    }
    if probs.nrows() != features.len() {
        return Err(Error::shape(
            format!("{} probability rows", features.len()),
            probs.nrows(),
        ));
    }
    let classes = probs.ncols();
    let x = features.feature_matrix();
    let cols: Vec<Vec<f64>> = x.columns().into_iter().map(|c| c.to_vec()).collect();
    let pcols: Vec<Vec<f64>> = probs.columns().into_iter().map(|c| c.to_vec()).collect();

    let mut values = vec![0.0; classes * bands * channels];
    values.par_iter_mut().enumerate().for_each(|(k, v)| {
        let ch = k % channels;
        let b = (k / channels) % bands;
        let c = k / (channels * bands);
        *v = binned_mutual_information(&cols[ch * bands + b], &pcols[c], MI_BINS);
    });

    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    let span = hi - lo;
    values.iter_mut().for_each(|v| {
        *v = if span > 0.0 { (*v - lo) / span } else { 0.0 };
    });
    Ok(MiTensor {
        classes,
        bands,
        channels,
        values,
    })
}

/// `subject,trial,window,label,e0..e{h−1}` rows of eval-mode embeddings, in
/// table order. Unlabeled rows carry label `-1`.
pub fn render_embeddings(model: &Checkpoint, table: &FeatureTable) -> Result<String> {
    let cache = model.forward_eval(table.feature_matrix().view())?;
    let h = cache.embedding.ncols();
    let mut s = String::from("subject,trial,window,label");
    for k in 0..h {
        let _ = write!(s, ",e{k}");
    }
    s.push('\n');
    for (r, row) in table.records().iter().zip(cache.embedding.rows()) {
        let label = r.label.map_or(-1, |l| l as i64);
        let _ = write!(
            s,
            "{},{},{},{}",
            r.subject_id, r.trial_id, r.window_id, label
        );
        for v in row {
            let _ = write!(s, ",{v:.16e}");
        }
        s.push('\n');
    }
    Ok(s)
}

pub fn export_embeddings(
    model: &Checkpoint,
    table: &FeatureTable,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, render_embeddings(model, table)?).map_err(|e| Error::io(path, e))
}
