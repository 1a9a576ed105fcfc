//! Kernel mean embedding alignment: multi-kernel Gaussian MMD between source
//! and target embeddings, confidence-gated pseudo-labels, and the
//! class-conditional MMD built on them. All estimators are the biased
//! V-statistic form, with closed-form gradients w.r.t. both embedding sets.

use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Gaussian kernels `exp(−‖a−b‖²/(2σ²))` mixed with nonnegative weights.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelBank {
    bandwidths: Vec<f64>,
    weights: Vec<f64>,
}

impl KernelBank {
    pub fn new(bandwidths: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if bandwidths.is_empty() {
            return Err(Error::InvalidInput(
                "kernel bank needs at least one bandwidth".into(),
            ));
        }
        if bandwidths.len() != weights.len() {
            return Err(Error::shape(
                format!("{} weights", bandwidths.len()),
                weights.len(),
            ));
        }
        if let Some(s) = bandwidths.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidInput(format!(
                "bandwidth {s} is not positive"
            )));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidInput("kernel weights must be >= 0".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "kernel weights must sum to 1, got {total}"
            )));
        }
        Ok(Self {
            bandwidths,
            weights,
        })
    }

    /// One Gaussian of bandwidth `sigma`.
    pub fn single(sigma: f64) -> Result<Self> {
        Self::new(vec![sigma], vec![1.0])
    }

    /// `count` bandwidths `σ·2^(i − (count−1)/2)`, uniformly weighted.
    /// Five kernels give `σ·{¼, ½, 1, 2, 4}`.
    pub fn around(sigma: f64, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::InvalidInput("kernel count must be >= 1".into()));
        }
        let mid = (count as f64 - 1.0) / 2.0;
        let bandwidths = (0..count)
            .map(|i| sigma * 2f64.powf(i as f64 - mid))
            .collect();
        Self::new(bandwidths, vec![1.0 / count as f64; count])
    }

    pub fn bandwidths(&self) -> &[f64] {
        &self.bandwidths
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Median pairwise Euclidean distance over `i < j`; 1.0 if that median is 0.
pub fn median_heuristic(embeddings: ArrayView2<f64>) -> Result<f64> {
    let n = embeddings.nrows();
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "median heuristic needs >= 2 rows, got {n}"
        )));
    }
    let sq = sq_dists(embeddings, embeddings);
    let mut d = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            d.push(sq[[i, j]].sqrt());
        }
    }
    let k = d.len();
    let (lower, &mut upper, _) = d.select_nth_unstable_by(k / 2, f64::total_cmp);
    let median = if k % 2 == 1 {
        upper
    } else {
        let below = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (below + upper)
    };
    Ok(if median > 0.0 { median } else { 1.0 })
}

/// Squared Euclidean distances via `‖a‖² + ‖b‖² − 2·a·b`, floored at 0.
fn sq_dists(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Array2<f64> {
    let na: Vec<f64> = a.rows().into_iter().map(|r| r.dot(&r)).collect();
    let nb: Vec<f64> = b.rows().into_iter().map(|r| r.dot(&r)).collect();
    let mut d = a.dot(&b.t());
    for (i, mut row) in d.rows_mut().into_iter().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (na[i] + nb[j] - 2.0 * *v).max(0.0);
        }
    }
    d
}

/// `Σ_b K[a,b]·(p_a − q_b)` for every row `a`, i.e. `diag(K·1)·P − K·Q`.
fn weighted_diffs(k: &ArrayView2<f64>, p: ArrayView2<f64>, q: ArrayView2<f64>) -> Array2<f64> {
    let row_sums = k.sum_axis(Axis(1)).insert_axis(Axis(1));
    &p * &row_sums - k.dot(&q)
}

/// Turns squared distances into `(Σ w·K summed over entries, Σ (w/σ²)·K)`.
fn bank_kernel(mut d: Array2<f64>, bank: &KernelBank) -> (f64, Array2<f64>) {
    let coef: Vec<(f64, f64)> = bank
        .bandwidths
        .iter()
        .zip(&bank.weights)
        .map(|(&s, &w)| (1.0 / (2.0 * s * s), w))
        .collect();
    let mut total = 0.0;
    d.mapv_inplace(|dist| {
        let mut grad = 0.0;
        for &(inv, w) in &coef {
            let k = w * (-dist * inv).exp();
            total += k;
            grad += 2.0 * inv * k;
        }
        grad
    });
    (total, d)
}

/// Value and gradients of a discrepancy w.r.t. both embedding sets.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscrepancyOutput {
    pub value: f64,
    pub grad_source: Array2<f64>,
    pub grad_target: Array2<f64>,
}

/// Biased multi-kernel MMD² between `source [n×h]` and `target [m×h]`.
pub fn mmd2(
    source: ArrayView2<f64>,
    target: ArrayView2<f64>,
    bank: &KernelBank,
) -> Result<DiscrepancyOutput> {
    let (n, m) = (source.nrows(), target.nrows());
    if n == 0 || m == 0 {
        return Err(Error::InvalidInput(format!(
            "MMD needs non-empty sets, got {n} and {m} rows"
        )));
    }
    if source.ncols() != target.ncols() {
        return Err(Error::shape(
            format!("target width {}", source.ncols()),
            target.ncols(),
        ));
    }
    let (nf, mf) = (n as f64, m as f64);
    let (vxx, mxx) = bank_kernel(sq_dists(source, source), bank);
    let (vyy, myy) = bank_kernel(sq_dists(target, target), bank);
    let (vxy, mxy) = bank_kernel(sq_dists(source, target), bank);
    let value = vxx / (nf * nf) + vyy / (mf * mf) - 2.0 * vxy / (nf * mf);

    // ∂k(a,b)/∂a = −k(a,b)·(a−b)/σ²
    let mut gx = weighted_diffs(&mxx.view(), source, source) * (-2.0 / (nf * nf));
    gx.scaled_add(
        2.0 / (nf * mf),
        &weighted_diffs(&mxy.view(), source, target),
    );
    let mut gy = weighted_diffs(&myy.view(), target, target) * (-2.0 / (mf * mf));
    gy.scaled_add(2.0 / (nf * mf), &weighted_diffs(&mxy.t(), target, source));
    Ok(DiscrepancyOutput {
        value,
        grad_source: gx,
        grad_target: gy,
    })
}

/// Target samples whose top class probability clears the gate.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PseudoLabelSet {
    pub indices: Vec<usize>,
    pub labels: Vec<usize>,
    pub confidences: Vec<f64>,
}

impl PseudoLabelSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Accepts row `i` iff `max_c p[i,c] ≥ tau`, labeled with the arg max (ties go
/// to the lowest class index).
pub fn filter_pseudo_labels(probs: ArrayView2<f64>, tau: f64) -> PseudoLabelSet {
    let mut out = PseudoLabelSet::default();
    for (i, row) in probs.rows().into_iter().enumerate() {
        let mut best = 0;
        for (c, &p) in row.iter().enumerate() {
            if p > row[best] {
                best = c;
            }
        }
        if !row.is_empty() && row[best] >= tau {
            out.indices.push(i);
            out.labels.push(best);
            out.confidences.push(row[best]);
        }
    }
    out
}

/// How per-class MMD terms are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CmmdOptions {
    /// Divide by the number of participating classes.
    pub class_mean: bool,
    /// Weight class `c` by its share of the source rows.
    pub prior_weighting: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CmmdOutput {
    pub value: f64,
    pub grad_source: Array2<f64>,
    pub grad_target: Array2<f64>,
    pub participating_classes: usize,
}

/// Class-conditional MMD² over classes with at least one source row and one
/// accepted target row. Rows of `target` that are not pseudo-labeled get zero
/// gradient.
pub fn cmmd2(
    source: ArrayView2<f64>,
    source_labels: &[usize],
    target: ArrayView2<f64>,
    pseudo: &PseudoLabelSet,
    bank: &KernelBank,
    num_classes: usize,
    options: CmmdOptions,
) -> Result<CmmdOutput> {
    if source_labels.len() != source.nrows() {
        return Err(Error::shape(
            format!("{} source labels", source.nrows()),
            source_labels.len(),
        ));
    }
    if let Some(&l) = source_labels
        .iter()
        .chain(&pseudo.labels)
        .find(|&&l| l >= num_classes)
    {
        return Err(Error::InvalidInput(format!(
            "label {l} >= num_classes {num_classes}"
        )));
    }
    if let Some(&i) = pseudo.indices.iter().find(|&&i| i >= target.nrows()) {
        return Err(Error::InvalidInput(format!(
            "pseudo-label index {i} outside target batch of {}",
            target.nrows()
        )));
    }

    let mut per_class = Vec::new();
    for c in 0..num_classes {
        let s_rows: Vec<usize> = (0..source.nrows())
            .filter(|&i| source_labels[i] == c)
            .collect();
        let t_rows: Vec<usize> = pseudo
            .indices
            .iter()
            .zip(&pseudo.labels)
            .filter(|(_, &l)| l == c)
            .map(|(&i, _)| i)
            .collect();
        if !s_rows.is_empty() && !t_rows.is_empty() {
            per_class.push((c, s_rows, t_rows));
        }
    }

    let participating = per_class.len();
    let mut value = 0.0;
    let mut gs = Array2::zeros(source.raw_dim());
    let mut gt = Array2::zeros(target.raw_dim());
    for (_, s_rows, t_rows) in &per_class {
        let mut weight = 1.0;
        if options.prior_weighting {
            weight *= s_rows.len() as f64 / source.nrows() as f64;
        }
        if options.class_mean {
            weight /= participating as f64;
        }
        let xs = source.select(Axis(0), s_rows);
        let xt = target.select(Axis(0), t_rows);
        let out = mmd2(xs.view(), xt.view(), bank)?;
        value += weight * out.value;
        for (k, &i) in s_rows.iter().enumerate() {
            gs.row_mut(i).scaled_add(weight, &out.grad_source.row(k));
        }
        for (k, &i) in t_rows.iter().enumerate() {
            gt.row_mut(i).scaled_add(weight, &out.grad_target.row(k));
        }
    }
    Ok(CmmdOutput {
        value,
        grad_source: gs,
        grad_target: gt,
        participating_classes: participating,
    })
}
