use std::collections::HashMap;

use ndarray::{Array1, Array2, Axis};
use proptest::prelude::*;

use sdcnet::align::{self, KernelBank};
use sdcnet::augment::{mix_pair, ss_mix_with_provenance, MixPolicy};
use sdcnet::datamodel::{self, Standardizer};
use sdcnet::dscl::{self, similarity_unit};
use sdcnet::eval::{binned_mutual_information, confusion_from_predictions};
use sdcnet::features::differential_entropy;
use sdcnet::trainer::{beta_from_loss, lambda_schedule, tau_schedules};
use sdcnet::{FeatureRecord, FeatureTable, RunConfig};

fn matrix(max_rows: usize, cols: usize) -> impl Strategy<Value = Array2<f64>> {
    (1..=max_rows).prop_flat_map(move |r| {
        prop::collection::vec(-3.0..3.0f64, r * cols)
            .prop_map(move |v| Array2::from_shape_vec((r, cols), v).unwrap())
    })
}

fn pair_of_sets() -> impl Strategy<Value = (Array2<f64>, Array2<f64>)> {
    (1..=4usize).prop_flat_map(|d| (matrix(7, d), matrix(7, d)))
}

fn labeled_table() -> impl Strategy<Value = FeatureTable> {
    (1..=3u32, 1..=3u32, 1..=4u32, 1..=3usize, 2..=3usize).prop_flat_map(|(s, t, w, d, c)| {
        let n = (s * t * w) as usize;
        prop::collection::vec(-5.0..5.0f64, n * d).prop_map(move |v| {
            let mut records = Vec::new();
            for subject in 0..s {
                for trial in 0..t {
                    for window in 0..w {
                        let k = records.len();
                        records.push(FeatureRecord {
                            subject_id: subject,
                            trial_id: trial,
                            window_id: window,
                            features: v[k * d..(k + 1) * d].to_vec(),
                            label: Some(((subject + trial) as usize) % c),
                        });
                    }
                }
            }
            FeatureTable::new(records, d, c).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mmd_is_symmetric_and_nonnegative((x, y) in pair_of_sets(), sigma in 0.2..4.0f64) {
        let bank = KernelBank::around(sigma, 5).unwrap();
        let xy = align::mmd2(x.view(), y.view(), &bank).unwrap();
        let yx = align::mmd2(y.view(), x.view(), &bank).unwrap();
        prop_assert!((xy.value - yx.value).abs() < 1e-12);
        prop_assert!(xy.value >= -1e-12);
        prop_assert!((&xy.grad_source - &yx.grad_target).iter().all(|v| v.abs() < 1e-12));
        let xx = align::mmd2(x.view(), x.view(), &bank).unwrap();
        prop_assert!(xx.value.abs() < 1e-12);
    }

    #[test]
    fn mmd_ignores_row_order((x, y) in pair_of_sets(), shift in 0usize..7) {
        let bank = KernelBank::around(1.0, 3).unwrap();
        let order: Vec<usize> = (0..x.nrows()).map(|i| (i + shift) % x.nrows()).collect();
        let px = x.select(Axis(0), &order);
        let a = align::mmd2(x.view(), y.view(), &bank).unwrap();
        let b = align::mmd2(px.view(), y.view(), &bank).unwrap();
        prop_assert!((a.value - b.value).abs() < 1e-12);
        for (k, &i) in order.iter().enumerate() {
            let diff = &a.grad_source.row(i) - &b.grad_source.row(k);
            prop_assert!(diff.iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn mmd_is_translation_invariant((x, y) in pair_of_sets(), t in -5.0..5.0f64) {
        let bank = KernelBank::around(1.5, 5).unwrap();
        let a = align::mmd2(x.view(), y.view(), &bank).unwrap().value;
        let b = align::mmd2((&x + t).view(), (&y + t).view(), &bank).unwrap().value;
        prop_assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn pseudo_gate_is_monotone(logits in matrix(10, 3), lo in 0.0..1.0f64, hi in 0.0..1.0f64) {
        let (lo, hi) = (lo.min(hi), lo.max(hi));
        let probs = sdcnet::net::softmax(&logits);
        let loose = align::filter_pseudo_labels(probs.view(), lo);
        let strict = align::filter_pseudo_labels(probs.view(), hi);
        prop_assert!(strict.indices.iter().all(|i| loose.indices.contains(i)));
        for (k, &i) in loose.indices.iter().enumerate() {
            let row = probs.row(i);
            let best = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(best >= lo);
            prop_assert_eq!(row[loose.labels[k]], best);
        }
    }

    #[test]
    fn similarity_ignores_positive_scale(
        a in prop::collection::vec(-2.0..2.0f64, 4),
        b in prop::collection::vec(-2.0..2.0f64, 4),
        c in 0.01..100.0f64,
    ) {
        let (a, b) = (Array1::from(a), Array1::from(b));
        let s = similarity_unit(a.view(), b.view());
        let t = similarity_unit((&a * c).view(), b.view());
        prop_assert!((s.unit - t.unit).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&s.unit));
        let ab = similarity_unit(b.view(), a.view());
        prop_assert_eq!(s.cosine, ab.cosine);
    }

    #[test]
    fn target_selection_partitions_pairs(e in matrix(9, 3), hi in 0.0..1.0f64, gap in 0.01..1.0f64) {
        let lo = hi - gap;
        let sel = dscl::target_pair_selection(e.view(), hi, lo, None).unwrap();
        let n = e.nrows();
        prop_assert_eq!(sel.positives + sel.negatives + sel.ambiguous, n * n.saturating_sub(1) / 2);
        prop_assert_eq!(sel.pairs.len(), sel.positives + sel.negatives);
        for &(i, j, z) in &sel.pairs {
            prop_assert!(i < j);
            let s = similarity_unit(e.row(i), e.row(j)).cosine;
            prop_assert_eq!(z == 1, s >= hi);
        }
    }

    #[test]
    fn table_csv_round_trip(table in labeled_table()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        datamodel::save_feature_table(&table, &path).unwrap();
        let back = datamodel::load_feature_table(&path).unwrap();
        prop_assert_eq!(back, table);
    }

    #[test]
    fn confusion_rows_sum_to_class_counts(
        pairs in prop::collection::vec((0usize..4, 0usize..4), 1..60),
    ) {
        let truth: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        let pred: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        let cm = confusion_from_predictions(&truth, &pred, 4).unwrap();
        let mut counts = [0usize; 4];
        truth.iter().for_each(|&t| counts[t] += 1);
        prop_assert_eq!(cm.row_sums(), counts.to_vec());
        prop_assert_eq!(cm.total(), truth.len());
        let hits = truth.iter().zip(&pred).filter(|(a, b)| a == b).count();
        prop_assert_eq!(cm.trace(), hits);
    }

    #[test]
    fn ss_mix_stays_inside_each_trial(table in labeled_table(), a in 0.1..4.0f64, seed in 0u64..1000) {
        let policy = MixPolicy { beta_param: a, augment_factor: 1.5, rng_seed: seed };
        let (mixed, prov) = ss_mix_with_provenance(&table, &policy).unwrap();
        let n = table.len();
        prop_assert_eq!(mixed.len(), n + prov.len());
        prop_assert_eq!(prov.len(), (1.5 * n as f64).round() as usize);
        let max_window = table.records().iter().map(|r| r.window_id).max().unwrap();
        for (k, p) in prov.iter().enumerate() {
            let (x, y) = (&table.records()[p.anchor], &table.records()[p.partner]);
            let out = &mixed.records()[n + k];
            prop_assert_eq!(p.anchor, k % n);
            prop_assert_eq!((x.subject_id, x.trial_id), (y.subject_id, y.trial_id));
            prop_assert_eq!((out.subject_id, out.trial_id, out.label), (x.subject_id, x.trial_id, x.label));
            prop_assert!(out.window_id > max_window);
            prop_assert!(p.omega > 0.0 && p.omega < 1.0);
            for ((v, u), w) in out.features.iter().zip(&x.features).zip(&y.features) {
                prop_assert!(*v >= u.min(*w) - 1e-12 && *v <= u.max(*w) + 1e-12);
            }
        }
    }

    #[test]
    fn mix_endpoints_are_exact(
        a in prop::collection::vec(-1e6..1e6f64, 1..8),
        b in prop::collection::vec(-1e6..1e6f64, 8),
    ) {
        let b = &b[..a.len()];
        prop_assert_eq!(mix_pair(&a, b, 1.0), a.clone());
        prop_assert_eq!(mix_pair(&a, b, 0.0), b.to_vec());
    }

    #[test]
    fn standardized_columns_are_centered(table in labeled_table()) {
        let st = Standardizer::fit(&table).unwrap();
        let z = st.transform(&table).feature_matrix();
        for col in z.columns() {
            prop_assert!(col.mean().unwrap().abs() < 1e-9);
        }
    }

    #[test]
    fn de_scales_with_log_gain(v in 1e-3..1e3f64, gain in 1e-2..1e2f64) {
        let d = differential_entropy(gain * gain * v).unwrap() - differential_entropy(v).unwrap();
        prop_assert!((d - gain.ln()).abs() < 1e-12);
    }

    #[test]
    fn beta_takes_three_values(l in 0.0..2.0f64, rho0 in 0.05..0.5f64, width in 0.05..1.0f64) {
        let rho1 = rho0 + width;
        let b = beta_from_loss(l, rho0, rho1);
        let expected = if l < rho0 { 1.0 } else if l == rho0 { 1.5 } else if l <= rho1 { 0.5 } else { 0.0 };
        prop_assert_eq!(b, expected);
    }

    #[test]
    fn schedules_stay_between_endpoints(epochs in 1usize..400, e in 0usize..400) {
        let cfg = RunConfig { epochs, ..RunConfig::default() };
        let e = e % epochs;
        let t = tau_schedules(e, &cfg);
        prop_assert!((0.80..=0.95).contains(&t.tau));
        prop_assert!((0.80..=0.95).contains(&t.tau_pu));
        prop_assert!((0.05..=0.20).contains(&t.tau_pl));
        prop_assert!(t.tau_pl < t.tau_pu);
        let l = lambda_schedule(e, epochs);
        prop_assert!((0.0..2.0).contains(&l));
    }

    #[test]
    fn mutual_information_is_bounded(
        xs in prop::collection::vec(-10.0..10.0f64, 2..200),
        seed in 0u64..50,
    ) {
        let ys: Vec<f64> = xs.iter().enumerate().map(|(i, _)| ((i as u64 * 7919 + seed) % 13) as f64).collect();
        let mi = binned_mutual_information(&xs, &ys, 10);
        prop_assert!(mi >= 0.0);
        prop_assert!(mi <= (10f64).ln() + 1e-12);
        let self_mi = binned_mutual_information(&xs, &xs, 10);
        prop_assert!(self_mi + 1e-12 >= mi);
    }

    #[test]
    fn config_text_round_trip(seed in 0u64..1_000_000, epochs in 1usize..500, lr in prop::sample::select(vec![0.001, 0.01])) {
        let cfg = RunConfig {
            seed,
            epochs,
            learning_rate: lr,
            use_cmmd: seed % 2 == 0,
            ..RunConfig::default()
        };
        let back = RunConfig::parse(&cfg.to_text()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}

#[test]
fn loso_splits_hold_out_each_subject_once() {
    let table = datamodel::make_synthetic_dataset(4, 2, 3, 4, 2, 1.0, 0.2, 1).unwrap();
    let splits = datamodel::loso_splits(&table).unwrap();
    let mut seen = HashMap::new();
    for s in &splits {
        *seen.entry(s.target_subject).or_insert(0) += 1;
        assert!(s.source().subjects().iter().all(|&x| x != s.target_subject));
        assert!(s.target().records().iter().all(|r| r.label.is_none()));
        assert_eq!(s.source().len() + s.target().len(), table.len());
    }
    assert_eq!(seen.len(), 4);
    assert!(seen.values().all(|&c| c == 1));
}
