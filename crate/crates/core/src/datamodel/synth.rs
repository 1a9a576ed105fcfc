//! Desk-scale surrogate for subject-shifted spectral features.
//!
//! Classes sit around fixed means; every subject applies its own random
//! near-identity rotation and a translation of norm `shift_strength` to all of
//! its samples. That produces both a marginal and a class-conditional shift
//! between subjects. Trials are label-pure.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use super::{FeatureRecord, FeatureTable};
use crate::error::{Error, Result};
use crate::rng::{self, Rng, Stream};

/// Arguments of [`make_synthetic_dataset`], bundled for CLI/FFI callers.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub num_subjects: usize,
    pub trials_per_subject: usize,
    pub windows_per_trial: usize,
    pub dim: usize,
    pub num_classes: usize,
    pub shift_strength: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn generate(&self) -> Result<FeatureTable> {
        make_synthetic_dataset(
            self.num_subjects,
            self.trials_per_subject,
            self.windows_per_trial,
            self.dim,
            self.num_classes,
            self.shift_strength,
            self.noise_sigma,
            self.seed,
        )
    }
}

fn gaussian_vec(rng: &mut Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| StandardNormal.sample(rng)).collect()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Columns of `I + scale·G` orthonormalized by modified Gram-Schmidt,
/// returned row-major.
fn near_identity_rotation(rng: &mut Rng, d: usize, scale: f64) -> Vec<Vec<f64>> {
    let g = 1.0 / (d as f64).sqrt();
    let mut cols: Vec<Vec<f64>> = (0..d)
        .map(|j| {
            (0..d)
                .map(|i| {
                    let z: f64 = StandardNormal.sample(rng);
                    f64::from(u8::from(i == j)) + scale * g * z
                })
                .collect()
        })
        .collect();
    for j in 0..d {
        for k in 0..j {
            let (done, rest) = cols.split_at_mut(j);
            let proj: f64 = done[k].iter().zip(&rest[0]).map(|(a, b)| a * b).sum();
            for (x, q) in rest[0].iter_mut().zip(&done[k]) {
                *x -= proj * q;
            }
        }
        let norm = cols[j].iter().map(|x| x * x).sum::<f64>().sqrt();
        cols[j].iter_mut().for_each(|x| *x /= norm);
    }
    (0..d)
        .map(|i| (0..d).map(|j| cols[j][i]).collect())
        .collect()
}

/// Generates a labeled table of `num_subjects × trials × windows` records.
///
/// Class means are rescaled so their minimum pairwise distance is
/// `4·max(noise_sigma, 1)`; the per-subject rotation strength is
/// `shift_strength / 4` relative to that unit separation.
#[allow(clippy::too_many_arguments)]
pub fn make_synthetic_dataset(
    num_subjects: usize,
    trials_per_subject: usize,
    windows_per_trial: usize,
    dim: usize,
    num_classes: usize,
    shift_strength: f64,
    noise_sigma: f64,
    seed: u64,
) -> Result<FeatureTable> {
    if num_subjects == 0 || trials_per_subject == 0 || windows_per_trial == 0 || num_classes == 0 {
        return Err(Error::InvalidInput(
            "subjects, trials, windows and classes must all be >= 1".into(),
        ));
    }
    if dim < num_classes {
        return Err(Error::InvalidInput(format!(
            "dim ({dim}) must be >= num_classes ({num_classes})"
        )));
    }
    if !(shift_strength >= 0.0 && shift_strength.is_finite()) {
        return Err(Error::InvalidInput(
            "shift_strength must be finite and >= 0".into(),
        ));
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::InvalidInput(
            "noise_sigma must be finite and >= 0".into(),
        ));
    }

    let mut rng = rng::stream(seed, Stream::Synth);

    let separation = 4.0 * noise_sigma.max(1.0);
    let mut means: Vec<Vec<f64>> = (0..num_classes)
        .map(|_| gaussian_vec(&mut rng, dim))
        .collect();
    let mut min_d = f64::INFINITY;
    for a in 0..num_classes {
        for b in a + 1..num_classes {
            min_d = min_d.min(dist(&means[a], &means[b]));
        }
    }
    if min_d.is_finite() && min_d > 0.0 {
        let s = separation / min_d;
        means.iter_mut().flatten().for_each(|x| *x *= s);
    }

    let mut records = Vec::with_capacity(num_subjects * trials_per_subject * windows_per_trial);
    for subject in 0..num_subjects {
        let rotation = near_identity_rotation(&mut rng, dim, shift_strength / 4.0);
        let mut direction = gaussian_vec(&mut rng, dim);
        let norm = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
        direction
            .iter_mut()
            .for_each(|x| *x *= shift_strength / norm.max(f64::MIN_POSITIVE));

        // Rotating the class order per subject keeps labels balanced overall.
        let offset = rng.random_range(0..num_classes);
        for trial in 0..trials_per_subject {
            let label = (trial + offset) % num_classes;
            for window in 0..windows_per_trial {
                let clean: Vec<f64> = means[label]
                    .iter()
                    .map(|m| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        m + noise_sigma * z
                    })
                    .collect();
                let features = rotation
                    .iter()
                    .zip(&direction)
                    .map(|(row, t)| row.iter().zip(&clean).map(|(r, x)| r * x).sum::<f64>() + t)
                    .collect();
                records.push(FeatureRecord {
                    subject_id: subject as u32,
                    trial_id: trial as u32,
                    window_id: window as u32,
                    features,
                    label: Some(label),
                });
            }
        }
    }
    FeatureTable::new(records, dim, num_classes)
}
