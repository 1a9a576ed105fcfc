//! SS-Mix: Mixup restricted to pairs drawn from one subject's single trial.
//!
//! A synthetic record is `ω·x_i + (1−ω)·x_j` with `ω ~ Beta(a, a)` and both
//! parents taken from the same `(subject, trial)` group. Trials are label-pure,
//! so the mixed one-hot label collapses to the trial's hard label.

use std::collections::BTreeMap;

use rand::Rng as _;
use rand_distr::{Beta, Distribution};

use crate::datamodel::{FeatureRecord, FeatureTable};
use crate::error::{Error, Result};
use crate::rng::{self, Rng, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct MixPolicy {
    /// Symmetric Beta parameter `a`.
    pub beta_param: f64,
    /// Synthetic records per original record.
    pub augment_factor: f64,
    pub rng_seed: u64,
}

impl Default for MixPolicy {
    fn default() -> Self {
        Self {
            beta_param: 0.5,
            augment_factor: 1.0,
            rng_seed: 0,
        }
    }
}

/// Where a synthetic record came from. Indices point into the input table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixProvenance {
    pub anchor: usize,
    pub partner: usize,
    pub omega: f64,
}

/// Draws `ω ~ Beta(a, a)`, strictly inside (0, 1).
pub fn sample_mix_coefficient(policy: &MixPolicy, rng: &mut Rng) -> f64 {
    let beta =
        Beta::new(policy.beta_param, policy.beta_param).expect("beta_param validated positive");
    loop {
        // Small `a` puts mass near the endpoints, where f64 can round to 0 or 1.
        let w: f64 = beta.sample(rng);
        if w > 0.0 && w < 1.0 {
            return w;
        }
    }
}

/// `ω·a + (1−ω)·b`.
pub fn mix_pair(a: &[f64], b: &[f64], omega: f64) -> Vec<f64> {
    a.iter()
        .zip(b)
        .map(|(x, y)| omega * x + (1.0 - omega) * y)
        .collect()
}

pub fn ss_mix(table: &FeatureTable, policy: &MixPolicy) -> Result<FeatureTable> {
    ss_mix_with_provenance(table, policy).map(|(t, _)| t)
}

/// [`ss_mix`] plus the parentage of every appended record.
///
/// Synthetic record `k` is anchored on original `k mod N`, so anchors are
/// spread evenly; its partner is a different window of the same trial when
/// one exists. Synthetic window ids start above the largest original id.
pub fn ss_mix_with_provenance(
    table: &FeatureTable,
    policy: &MixPolicy,
) -> Result<(FeatureTable, Vec<MixProvenance>)> {
    if !(policy.beta_param > 0.0) {
        return Err(Error::InvalidInput(format!(
            "beta_param must be > 0, got {}",
            policy.beta_param
        )));
    }
    if !(policy.augment_factor >= 0.0 && policy.augment_factor.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "augment_factor must be >= 0, got {}",
            policy.augment_factor
        )));
    }
    if table.is_empty() {
        return Err(Error::InvalidInput("cannot mix an empty table".into()));
    }
    let labels = table.labels()?;

    let mut groups: BTreeMap<(u32, u32), Vec<usize>> = BTreeMap::new();
    for (i, r) in table.records().iter().enumerate() {
        groups
            .entry((r.subject_id, r.trial_id))
            .or_default()
            .push(i);
    }
    for ((subject, trial), members) in &groups {
        let l = labels[members[0]];
        if members.iter().any(|&i| labels[i] != l) {
            return Err(Error::InvalidInput(format!(
                "trial {trial} of subject {subject} mixes labels; SS-Mix needs label-pure trials"
            )));
        }
    }

    let n = table.len();
    let total = (policy.augment_factor * n as f64).round() as usize;
    let first_window = table
        .records()
        .iter()
        .map(|r| r.window_id)
        .max()
        .unwrap_or(0)
        + 1;
    let mut rng = rng::stream(policy.rng_seed, Stream::Mix);
    let mut records = table.records().to_vec();
    let mut provenance = Vec::with_capacity(total);
    for k in 0..total {
        let anchor = k % n;
        let a = &table.records()[anchor];
        let members = &groups[&(a.subject_id, a.trial_id)];
        let partner = if members.len() >= 2 {
            let pick = rng.random_range(0..members.len() - 1);
            let p = members[pick];
            if p == anchor {
                members[members.len() - 1]
            } else {
                p
            }
        } else {
            anchor
        };
        let omega = sample_mix_coefficient(policy, &mut rng);
        records.push(FeatureRecord {
            subject_id: a.subject_id,
            trial_id: a.trial_id,
            window_id: first_window + k as u32,
            features: if partner == anchor {
                a.features.clone()
            } else {
                mix_pair(&a.features, &table.records()[partner].features, omega)
            },
            label: a.label,
        });
        provenance.push(MixProvenance {
            anchor,
            partner,
            omega,
        });
    }
    Ok((
        FeatureTable::new(records, table.dim(), table.num_classes())?,
        provenance,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::make_synthetic_dataset;

    #[test]
    fn endpoint_and_midpoint() {
        assert_eq!(mix_pair(&[0.0, 2.0], &[2.0, 0.0], 0.5), vec![1.0, 1.0]);
        assert_eq!(mix_pair(&[3.0, -1.0], &[7.0, 9.0], 1.0), vec![3.0, -1.0]);
        assert_eq!(mix_pair(&[3.0, -1.0], &[7.0, 9.0], 0.0), vec![7.0, 9.0]);
    }

    #[test]
    fn beta_moments() {
        let policy = MixPolicy::default();
        let mut rng = rng::stream(42, Stream::Mix);
        let n = 100_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| sample_mix_coefficient(&policy, &mut rng))
            .collect();
        assert!(draws.iter().all(|&w| w > 0.0 && w < 1.0));
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|w| (w - mean) * (w - mean)).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.01, "{mean}");
        assert!((var - 0.125).abs() < 0.005, "{var}");
    }

    #[test]
    fn output_size_and_fresh_window_ids() {
        let t = make_synthetic_dataset(2, 3, 4, 5, 3, 1.0, 0.5, 1).unwrap();
        let policy = MixPolicy {
            augment_factor: 1.5,
            ..MixPolicy::default()
        };
        let out = ss_mix(&t, &policy).unwrap();
        assert_eq!(out.len(), t.len() + 36);
        let max_orig = t.records().iter().map(|r| r.window_id).max().unwrap();
        assert!(out.records()[t.len()..]
            .iter()
            .all(|r| r.window_id > max_orig));
        assert_eq!(&out.records()[..t.len()], t.records());
    }

    #[test]
    fn single_window_trial_degenerates_to_copy() {
        let t = make_synthetic_dataset(2, 2, 1, 4, 2, 1.0, 0.5, 1).unwrap();
        let (out, prov) = ss_mix_with_provenance(&t, &MixPolicy::default()).unwrap();
        for (k, p) in prov.iter().enumerate() {
            assert_eq!(p.anchor, p.partner);
            assert_eq!(
                out.records()[t.len() + k].features,
                t.records()[p.anchor].features
            );
        }
    }

    #[test]
    fn rejects_unlabeled_empty_and_impure() {
        let t = make_synthetic_dataset(1, 2, 3, 4, 2, 0.0, 0.5, 1).unwrap();
        assert!(ss_mix(&t.without_labels(), &MixPolicy::default()).is_err());
        let empty = FeatureTable::new(vec![], 4, 2).unwrap();
        assert!(ss_mix(&empty, &MixPolicy::default()).is_err());
        let mut recs = t.into_records();
        recs[0].label = Some(1 - recs[0].label.unwrap());
        let impure = FeatureTable::new(recs, 4, 2).unwrap();
        assert!(ss_mix(&impure, &MixPolicy::default()).is_err());
    }

    #[test]
    fn deterministic_under_seed() {
        let t = make_synthetic_dataset(2, 2, 5, 4, 2, 1.0, 0.5, 1).unwrap();
        let p = MixPolicy {
            rng_seed: 3,
            ..MixPolicy::default()
        };
        assert_eq!(ss_mix(&t, &p).unwrap(), ss_mix(&t, &p).unwrap());
    }
}
