//! Band differential-entropy features from raw multichannel trials.
//!
//! Each channel is cut into windows, the window mean is removed, a taper is
//! applied and the one-sided power spectrum is summed over each band. With the
//! Parseval normalization below, the band sum is an estimate of the variance of
//! the band-limited signal, and the feature is the Gaussian differential
//! entropy `½·ln(2πe·σ²)` of that variance.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{Array2, Array3};
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::datamodel::{FeatureRecord, FeatureTable};
use crate::error::{Error, Result};

/// Variances below this are floored before taking the log.
pub const VARIANCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct EegTrial {
    pub subject_id: u32,
    pub trial_id: u32,
    pub sample_rate_hz: f64,
    /// `[channels × samples]`.
    pub signal: Array2<f64>,
    pub label: Option<usize>,
}

impl EegTrial {
    pub fn channels(&self) -> usize {
        self.signal.nrows()
    }

    pub fn samples(&self) -> usize {
        self.signal.ncols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandDefinition {
    pub name: String,
    pub low_hz: f64,
    pub high_hz: f64,
}

impl BandDefinition {
    pub fn new(name: &str, low_hz: f64, high_hz: f64) -> Self {
        Self {
            name: name.to_string(),
            low_hz,
            high_hz,
        }
    }

    /// Delta, theta, alpha, beta, gamma.
    pub fn canonical() -> Vec<BandDefinition> {
        vec![
            Self::new("delta", 1.0, 4.0),
            Self::new("theta", 4.0, 8.0),
            Self::new("alpha", 8.0, 13.0),
            Self::new("beta", 13.0, 30.0),
            Self::new("gamma", 30.0, 50.0),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Taper {
    Rectangular,
    Hann,
}

impl Taper {
    fn weights(self, n: usize) -> Vec<f64> {
        match self {
            Taper::Rectangular => vec![1.0; n],
            // Periodic Hann: its spectrum is confined to bins 0 and ±1.
            Taper::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralConfig {
    pub window_seconds: f64,
    pub hop_seconds: f64,
    pub taper: Taper,
    pub bands: Vec<BandDefinition>,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self {
            window_seconds: 1.0,
            hop_seconds: 1.0,
            taper: Taper::Hann,
            bands: BandDefinition::canonical(),
        }
    }
}

impl SpectralConfig {
    fn lengths(&self, fs: f64) -> Result<(usize, usize)> {
        if !(self.hop_seconds > 0.0 && self.hop_seconds <= self.window_seconds) {
            return Err(Error::InvalidInput(format!(
                "need 0 < hop_seconds <= window_seconds, got {} and {}",
                self.hop_seconds, self.window_seconds
            )));
        }
        let win = (self.window_seconds * fs).round() as usize;
        let hop = ((self.hop_seconds * fs).round() as usize).max(1);
        if win < 2 {
            return Err(Error::InvalidInput(format!(
                "window of {}s at {fs} Hz is shorter than 2 samples",
                self.window_seconds
            )));
        }
        Ok((win, hop))
    }

    fn check_bands(&self, fs: f64) -> Result<()> {
        if self.bands.is_empty() {
            return Err(Error::InvalidInput("no frequency bands configured".into()));
        }
        for b in &self.bands {
            if !(0.0 < b.low_hz && b.low_hz < b.high_hz && b.high_hz < fs / 2.0) {
                return Err(Error::InvalidInput(format!(
                    "band {} [{}, {}) Hz must satisfy 0 < low < high < Nyquist ({} Hz)",
                    b.name,
                    b.low_hz,
                    b.high_hz,
                    fs / 2.0
                )));
            }
        }
        Ok(())
    }
}

/// Band-limited variance estimates, `[windows × channels × bands]`.
///
/// Windows are `floor((samples − win)/hop) + 1`. A bin at `k·fs/N` belongs to a
/// band when `low ≤ f < high`.
pub fn band_variance(trial: &EegTrial, config: &SpectralConfig) -> Result<Array3<f64>> {
    let fs = trial.sample_rate_hz;
    if !(fs > 0.0 && fs.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "sample rate must be > 0, got {fs}"
        )));
    }
    config.check_bands(fs)?;
    let (win, hop) = config.lengths(fs)?;
    if trial.samples() < win {
        return Err(Error::InvalidInput(format!(
            "trial {} has {} samples, one window needs {win}",
            trial.trial_id,
            trial.samples()
        )));
    }
    if trial.signal.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "trial {} contains non-finite samples",
            trial.trial_id
        )));
    }

    let n_windows = (trial.samples() - win) / hop + 1;
    let taper = config.taper.weights(win);
    let taper_energy: f64 = taper.iter().map(|w| w * w).sum();
    let norm = 2.0 / (win as f64 * taper_energy);
    let bins: Vec<Vec<usize>> = config
        .bands
        .iter()
        .map(|b| {
            (1..win.div_ceil(2))
                .filter(|&k| {
                    let f = k as f64 * fs / win as f64;
                    b.low_hz <= f && f < b.high_hz
                })
                .collect()
        })
        .collect();

    let fft = FftPlanner::<f64>::new().plan_fft_forward(win);
    let mut buf = vec![Complex::new(0.0, 0.0); win];
    let mut out = Array3::zeros((n_windows, trial.channels(), config.bands.len()));
    for w in 0..n_windows {
        let start = w * hop;
        for (ch, row) in trial.signal.rows().into_iter().enumerate() {
            let seg = row.slice(ndarray::s![start..start + win]);
            let mean = seg.sum() / win as f64;
            for ((b, &x), &t) in buf.iter_mut().zip(seg.iter()).zip(&taper) {
                *b = Complex::new((x - mean) * t, 0.0);
            }
            fft.process(&mut buf);
            for (band, ks) in bins.iter().enumerate() {
                let p: f64 = ks.iter().map(|&k| buf[k].norm_sqr()).sum();
                out[[w, ch, band]] = norm * p;
            }
        }
    }
    Ok(out)
}

/// Differential entropy in nats of a Gaussian with variance `variance`.
pub fn differential_entropy(variance: f64) -> Result<f64> {
    if !(variance > 0.0) || !variance.is_finite() {
        return Err(Error::Domain(format!(
            "differential entropy needs a positive finite variance, got {variance}"
        )));
    }
    Ok(0.5 * (2.0 * PI * std::f64::consts::E * variance).ln())
}

/// One record per (trial, window); feature index is `channel·bands + band`.
pub fn extract_de_features(trials: &[EegTrial], config: &SpectralConfig) -> Result<FeatureTable> {
    let Some(first) = trials.first() else {
        return Err(Error::InvalidInput("no trials to extract".into()));
    };
    let channels = first.channels();
    let fs = first.sample_rate_hz;
    for t in trials {
        if t.channels() != channels || t.sample_rate_hz != fs {
            return Err(Error::InvalidInput(format!(
                "trial {} of subject {} has {} channels at {} Hz, expected {channels} at {fs} Hz",
                t.trial_id,
                t.subject_id,
                t.channels(),
                t.sample_rate_hz
            )));
        }
    }
    let n_bands = config.bands.len();
    let per_trial: Vec<Vec<FeatureRecord>> = trials
        .par_iter()
        .map(|t| {
            let var = band_variance(t, config)?;
            let records = var
                .outer_iter()
                .enumerate()
                .map(|(w, win)| FeatureRecord {
                    subject_id: t.subject_id,
                    trial_id: t.trial_id,
                    window_id: w as u32,
                    // Row-major over (channel, band) is the channel-major layout.
                    features: win
                        .iter()
                        .map(|&v| {
                            0.5 * (2.0 * PI * std::f64::consts::E * v.max(VARIANCE_FLOOR)).ln()
                        })
                        .collect(),
                    label: t.label,
                })
                .collect();
            Ok(records)
        })
        .collect::<Result<_>>()?;
    let num_classes = trials
        .iter()
        .filter_map(|t| t.label)
        .max()
        .map_or(1, |m| m + 1);
    FeatureTable::new(
        per_trial.into_iter().flatten().collect(),
        channels * n_bands,
        num_classes,
    )
}

const RAW_HEADER: &str = "subject,trial,label,sample_rate,channels,samples";

/// Reads raw trials.
///
/// After the header line, each trial is a metadata row with the six header
/// fields followed by `channels` rows of `samples` comma-separated values.
/// `label` is `-1` when unknown.
pub fn load_raw_trials(path: impl AsRef<Path>) -> Result<Vec<EegTrial>> {
    let path = path.as_ref();
    let origin = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let fmt_err = |line: usize, message: String| Error::Format {
        path: origin.clone(),
        line,
        message,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.is_empty());
    match lines.next() {
        Some((_, h)) if h == RAW_HEADER => {}
        Some((n, _)) => return Err(fmt_err(n, format!("header must be {RAW_HEADER}"))),
        None => return Err(fmt_err(1, "missing header".into())),
    }
    let mut trials = Vec::new();
    while let Some((n, meta)) = lines.next() {
        let f: Vec<&str> = meta.split(',').map(str::trim).collect();
        if f.len() != 6 {
            return Err(fmt_err(
                n,
                format!("trial header needs 6 fields, found {}", f.len()),
            ));
        }
        let int = |k: usize| -> Result<i64> {
            f[k].parse()
                .map_err(|e| fmt_err(n, format!("field {k}: {e}")))
        };
        let (subject, trial, label) = (int(0)?, int(1)?, int(2)?);
        let fs: f64 = f[3]
            .parse()
            .map_err(|e| fmt_err(n, format!("sample_rate: {e}")))?;
        let (channels, samples) = (int(4)?, int(5)?);
        if subject < 0 || trial < 0 || label < -1 || channels < 1 || samples < 1 {
            return Err(fmt_err(n, "negative or zero field in trial header".into()));
        }
        let (channels, samples) = (channels as usize, samples as usize);
        let mut signal = Array2::zeros((channels, samples));
        for ch in 0..channels {
            let (ln, row) = lines
                .next()
                .ok_or_else(|| fmt_err(n, format!("trial ends before channel {ch}")))?;
            let values: Vec<&str> = row.split(',').collect();
            if values.len() != samples {
                return Err(fmt_err(
                    ln,
                    format!("expected {samples} samples, found {}", values.len()),
                ));
            }
            for (k, v) in values.iter().enumerate() {
                signal[[ch, k]] = v
                    .trim()
                    .parse()
                    .map_err(|e| fmt_err(ln, format!("sample {k}: {e}")))?;
            }
        }
        trials.push(EegTrial {
            subject_id: subject as u32,
            trial_id: trial as u32,
            sample_rate_hz: fs,
            signal,
            label: (label >= 0).then_some(label as usize),
        });
    }
    Ok(trials)
}

pub fn save_raw_trials(trials: &[EegTrial], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut s = String::new();
    s.push_str(RAW_HEADER);
    s.push('\n');
    for t in trials {
        let label = t.label.map_or(-1, |l| l as i64);
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            t.subject_id,
            t.trial_id,
            label,
            t.sample_rate_hz,
            t.channels(),
            t.samples()
        );
        for row in t.signal.rows() {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            s.push_str(&line.join(","));
            s.push('\n');
        }
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}
