//! Reference implementations used as oracles: plain double loops, finite
//! differences and quadrature, written without reusing library internals.

#![allow(dead_code)]

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sdcnet::align::{self, CmmdOptions, KernelBank, PseudoLabelSet};
use sdcnet::dscl::{self, PairSelection};
use sdcnet::net::{self, MlpParams, Mode};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rows: usize, cols: usize, scale: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| scale * (2.0 * rng.random::<f64>() - 1.0))
}

fn gauss(a: &[f64], b: &[f64], sigma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    (-d2 / (2.0 * sigma * sigma)).exp()
}

fn mean_kernel(a: &[Vec<f64>], b: &[Vec<f64>], bank: &KernelBank) -> f64 {
    let mut total = 0.0;
    for u in a {
        for v in b {
            for (s, w) in bank.bandwidths().iter().zip(bank.weights()) {
                total += w * gauss(u, v, *s);
            }
        }
    }
    total / (a.len() * b.len()) as f64
}

fn rows(m: ArrayView2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

/// Biased MMD² as the literal triple double sum.
pub fn brute_mmd2(x: ArrayView2<f64>, y: ArrayView2<f64>, bank: &KernelBank) -> f64 {
    let (x, y) = (rows(x), rows(y));
    mean_kernel(&x, &x, bank) + mean_kernel(&y, &y, bank) - 2.0 * mean_kernel(&x, &y, bank)
}

/// Sum of per-class [`brute_mmd2`] over classes present on both sides.
pub fn brute_cmmd2(
    x: ArrayView2<f64>,
    labels: &[usize],
    y: ArrayView2<f64>,
    pseudo: &PseudoLabelSet,
    bank: &KernelBank,
    classes: usize,
) -> f64 {
    let (x, y) = (rows(x), rows(y));
    let mut total = 0.0;
    for c in 0..classes {
        let xs: Vec<Vec<f64>> = x
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l == c)
            .map(|(r, _)| r.clone())
            .collect();
        let ys: Vec<Vec<f64>> = pseudo
            .indices
            .iter()
            .zip(&pseudo.labels)
            .filter(|(_, &l)| l == c)
            .map(|(&i, _)| y[i].clone())
            .collect();
        if xs.is_empty() || ys.is_empty() {
            continue;
        }
        total += mean_kernel(&xs, &xs, bank) + mean_kernel(&ys, &ys, bank)
            - 2.0 * mean_kernel(&xs, &ys, bank);
    }
    total
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

fn plain_bce(t: f64, s: f64) -> f64 {
    let s = s.clamp(1e-7, 1.0 - 1e-7);
    -t * s.ln() - (1.0 - t) * (1.0 - s).ln()
}

/// Source pair loss over all ordered pairs `i ≠ j`.
pub fn brute_source_pairs(embs: ArrayView2<f64>, labels: &[usize]) -> f64 {
    let e = rows(embs);
    let b = e.len();
    let mut total = 0.0;
    for i in 0..b {
        for j in 0..b {
            if i != j {
                let t = if labels[i] == labels[j] { 1.0 } else { 0.0 };
                total += plain_bce(t, 0.5 * (cosine(&e[i], &e[j]) + 1.0));
            }
        }
    }
    total / (b * (b - 1)) as f64
}

/// Target pair loss: mean BCE over the pairs a fixed selection kept.
pub fn brute_target_pairs(embs: ArrayView2<f64>, selection: &PairSelection) -> f64 {
    let e = rows(embs);
    if selection.pairs.is_empty() {
        return 0.0;
    }
    let total: f64 = selection
        .pairs
        .iter()
        .map(|&(i, j, z)| plain_bce(f64::from(z), 0.5 * (cosine(&e[i], &e[j]) + 1.0)))
        .sum();
    total / selection.pairs.len() as f64
}

/// `−∫ p ln p` for N(0, σ²) by composite Simpson over ±12σ.
pub fn integrated_gaussian_entropy(variance: f64) -> f64 {
    let sigma = variance.sqrt();
    let (lo, hi) = (-12.0 * sigma, 12.0 * sigma);
    let n = 200_000;
    let h = (hi - lo) / n as f64;
    let log_norm = -0.5 * (2.0 * std::f64::consts::PI * variance).ln();
    let f = |x: f64| {
        let lp = log_norm - x * x / (2.0 * variance);
        -lp.exp() * lp
    };
    let mut s = f(lo) + f(hi);
    for k in 1..n {
        let x = lo + k as f64 * h;
        s += if k % 2 == 1 { 4.0 * f(x) } else { 2.0 * f(x) };
    }
    s * h / 3.0
}

/// A fixed batch for per-term gradient checks.
pub struct GradFixture {
    pub params: MlpParams,
    pub source: Array2<f64>,
    pub labels: Vec<usize>,
    pub target: Array2<f64>,
    pub bank: KernelBank,
    pub pseudo: PseudoLabelSet,
    pub selection: PairSelection,
    pub num_classes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Term {
    CrossEntropy,
    Mmd,
    Cmmd,
    SourcePairs,
    TargetPairs,
}

impl Term {
    pub const ALL: [Term; 5] = [
        Term::CrossEntropy,
        Term::Mmd,
        Term::Cmmd,
        Term::SourcePairs,
        Term::TargetPairs,
    ];
}

impl GradFixture {
    /// 6→4→4→3 network with pseudo-labels and target pairs frozen from the
    /// initial parameters.
    pub fn new(seed: u64) -> Self {
        let mut r = rng(seed);
        let mut init = sdcnet::rng::stream(seed, sdcnet::rng::Stream::Init);
        let mut params = net::init_params(6, 4, 4, 3, &mut init);
        // Positive hidden biases keep the small ReLU layers away from dead units.
        params.b1.fill(0.3);
        params.b2.fill(0.3);
        let source = random_matrix(8, 6, 1.0, &mut r);
        let target = random_matrix(7, 6, 1.0, &mut r) + 0.5;
        let labels = vec![0, 1, 2, 0, 1, 2, 0, 1];
        let t = net::forward(&params, target.view(), Mode::Eval, 0.0, None).unwrap();
        let pseudo = align::filter_pseudo_labels(t.probs.view(), 0.0);
        let (lo, hi) = cosine_band(t.embedding.view());
        let selection = dscl::target_pair_selection(t.embedding.view(), hi, lo, None).unwrap();
        Self {
            params,
            source,
            labels,
            target,
            bank: KernelBank::around(1.0, 5).unwrap(),
            pseudo,
            selection,
            num_classes: 3,
        }
    }

    /// Value of one term at `params`, selections held fixed.
    pub fn value(&self, params: &MlpParams, term: Term) -> f64 {
        self.value_and_grad(params, term).0
    }

    pub fn value_and_grad(&self, params: &MlpParams, term: Term) -> (f64, MlpParams) {
        let s = net::forward(params, self.source.view(), Mode::Eval, 0.0, None).unwrap();
        let t = net::forward(params, self.target.view(), Mode::Eval, 0.0, None).unwrap();
        let back = |cache, dl: Option<&Array2<f64>>, de: Option<&Array2<f64>>| {
            net::backward(params, cache, dl.map(|a| a.view()), de.map(|a| a.view())).unwrap()
        };
        match term {
            Term::CrossEntropy => {
                let (v, dl) = net::cross_entropy_loss(&s, &self.labels).unwrap();
                (v, back(&s, Some(&dl), None))
            }
            Term::Mmd => {
                let o = align::mmd2(s.embedding.view(), t.embedding.view(), &self.bank).unwrap();
                let mut g = back(&s, None, Some(&o.grad_source));
                g.add_assign(&back(&t, None, Some(&o.grad_target)));
                (o.value, g)
            }
            Term::Cmmd => {
                let o = align::cmmd2(
                    s.embedding.view(),
                    &self.labels,
                    t.embedding.view(),
                    &self.pseudo,
                    &self.bank,
                    self.num_classes,
                    CmmdOptions::default(),
                )
                .unwrap();
                let mut g = back(&s, None, Some(&o.grad_source));
                g.add_assign(&back(&t, None, Some(&o.grad_target)));
                (o.value, g)
            }
            Term::SourcePairs => {
                let o = dscl::source_pairwise_loss(s.embedding.view(), &self.labels).unwrap();
                (o.value, back(&s, None, Some(&o.grad)))
            }
            Term::TargetPairs => {
                let o = dscl::target_pairwise_loss(t.embedding.view(), &self.selection).unwrap();
                (o.value, back(&t, None, Some(&o.grad)))
            }
        }
    }
}

/// Thresholds splitting the observed cosines into thirds, so the frozen
/// selection holds both positive and negative pairs.
fn cosine_band(embs: ArrayView2<f64>) -> (f64, f64) {
    let e = rows(embs);
    let mut c = Vec::new();
    for i in 0..e.len() {
        for j in i + 1..e.len() {
            c.push(cosine(&e[i], &e[j]));
        }
    }
    c.sort_by(f64::total_cmp);
    (c[c.len() / 3], c[2 * c.len() / 3])
}

/// Largest `|analytic − numeric| / max(|analytic|, |numeric|, floor)` over
/// every parameter, with central differences of step `h`.
pub fn max_relative_error(fixture: &GradFixture, term: Term, h: f64, floor: f64) -> (f64, usize) {
    let (_, analytic) = fixture.value_and_grad(&fixture.params, term);
    let analytic: Vec<f64> = analytic
        .slices()
        .iter()
        .flat_map(|s| s.iter().copied())
        .collect();
    let mut worst = 0.0f64;
    let mut k = 0;
    let mut probe = fixture.params.clone();
    for block in 0..6 {
        let len = probe.slices()[block].len();
        for i in 0..len {
            let orig = probe.slices()[block][i];
            probe.slices_mut()[block][i] = orig + h;
            let up = fixture.value(&probe, term);
            probe.slices_mut()[block][i] = orig - h;
            let down = fixture.value(&probe, term);
            probe.slices_mut()[block][i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic[k];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
            worst = worst.max(rel);
            k += 1;
        }
    }
    (worst, k)
}
