//! Pairwise similarity consistency on both domains.
//!
//! Source pairs are supervised by label agreement; target pairs are
//! self-labeled by thresholding their cosine similarity, with the ambiguous
//! band in between left out. Both use BCE between the pair indicator and the
//! rescaled cosine `S′ = (S + 1)/2`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// Probability clamp applied to `S′` before the BCE.
pub const BCE_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Similarity {
    /// Raw cosine `S` in [−1, 1].
    pub cosine: f64,
    /// `S′ = (S + 1)/2`, not clamped.
    pub unit: f64,
    /// One of the vectors was zero; `S` is defined as 0.
    pub degenerate: bool,
}

pub fn similarity_unit(a: ArrayView1<f64>, b: ArrayView1<f64>) -> Similarity {
    let (na, nb) = (a.dot(&a).sqrt(), b.dot(&b).sqrt());
    if na == 0.0 || nb == 0.0 {
        return Similarity {
            cosine: 0.0,
            unit: 0.5,
            degenerate: true,
        };
    }
    let cosine = (a.dot(&b) / (na * nb)).clamp(-1.0, 1.0);
    Similarity {
        cosine,
        unit: 0.5 * (cosine + 1.0),
        degenerate: false,
    }
}

/// `−t·ln s − (1−t)·ln(1−s)` with `s` clamped to `[ε, 1−ε]`, and its
/// derivative in `s` (zero where the clamp is active).
pub fn bce(target: f64, s: f64) -> (f64, f64) {
    let clamped = s.clamp(BCE_EPS, 1.0 - BCE_EPS);
    let value = -target * clamped.ln() - (1.0 - target) * (1.0 - clamped).ln();
    let slope = if !(BCE_EPS..=1.0 - BCE_EPS).contains(&s) {
        0.0
    } else {
        -target / clamped + (1.0 - target) / (1.0 - clamped)
    };
    (value, slope)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairLossOutput {
    pub value: f64,
    pub grad: Array2<f64>,
}

/// Unit rows (zero rows stay zero), norms, and the cosine matrix.
fn cosine_matrix(embs: ArrayView2<f64>) -> (Array2<f64>, Array1<f64>, Array2<f64>) {
    let norms: Array1<f64> = embs.rows().into_iter().map(|r| r.dot(&r).sqrt()).collect();
    let mut unit = embs.to_owned();
    for (mut row, &n) in unit.rows_mut().into_iter().zip(&norms) {
        if n > 0.0 {
            row /= n;
        }
    }
    let cos = unit.dot(&unit.t()).mapv(|c| c.clamp(-1.0, 1.0));
    (unit, norms, cos)
}

/// Sums `scale·BCE(t, S′_ij)` over `(i, j, t)` and backpropagates into the
/// embeddings through both ends of every pair.
fn pair_bce(embs: ArrayView2<f64>, pairs: &[(usize, usize, f64)], scale: f64) -> PairLossOutput {
    let b = embs.nrows();
    let (unit, norms, cos) = cosine_matrix(embs);
    // coef[i][j] = ∂L/∂S_ij, accumulated symmetrically.
    let mut coef = Array2::<f64>::zeros((b, b));
    let mut value = 0.0;
    for &(i, j, t) in pairs {
        let (v, slope) = bce(t, 0.5 * (cos[[i, j]] + 1.0));
        value += scale * v;
        let c = scale * slope * 0.5;
        coef[[i, j]] += c;
        coef[[j, i]] += c;
    }
    // ∂S_ij/∂a_i = (u_j − S_ij·u_i)/‖a_i‖
    let mut grad = coef.dot(&unit);
    for i in 0..b {
        if norms[i] == 0.0 {
            grad.row_mut(i).fill(0.0);
            continue;
        }
        let shrink: f64 = (0..b).map(|j| coef[[i, j]] * cos[[i, j]]).sum();
        let ui = unit.row(i).to_owned();
        let mut row = grad.row_mut(i);
        row.scaled_add(-shrink, &ui);
        row /= norms[i];
    }
    PairLossOutput { value, grad }
}

/// Supervised pairwise loss over all ordered pairs `i ≠ j`, normalized by
/// `B(B−1)`. Pair target is 1 when the labels agree.
pub fn source_pairwise_loss(embs: ArrayView2<f64>, labels: &[usize]) -> Result<PairLossOutput> {
    let b = embs.nrows();
    if b < 2 {
        return Err(Error::InvalidInput(format!(
            "source pairwise loss needs >= 2 rows, got {b}"
        )));
    }
    if labels.len() != b {
        return Err(Error::shape(format!("{b} labels"), labels.len()));
    }
    // (i, j) and (j, i) contribute identically, so walk i < j at double weight.
    let pairs: Vec<(usize, usize, f64)> = (0..b)
        .flat_map(|i| (i + 1..b).map(move |j| (i, j)))
        .map(|(i, j)| (i, j, f64::from(u8::from(labels[i] == labels[j]))))
        .collect();
    Ok(pair_bce(embs, &pairs, 2.0 / (b * (b - 1)) as f64))
}

/// Confident target pairs chosen by thresholding raw cosine similarity.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PairSelection {
    /// `(i, j, ζ)` with `i < j`.
    pub pairs: Vec<(usize, usize, u8)>,
    pub positives: usize,
    pub negatives: usize,
    pub ambiguous: usize,
}

impl PairSelection {
    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// For unordered `i < j` among `candidates` (all rows when `None`):
/// `ζ = 1` if `S ≥ τ_pu`, `ζ = 0` if `S < τ_pl`, excluded otherwise.
pub fn target_pair_selection(
    embs: ArrayView2<f64>,
    tau_pu: f64,
    tau_pl: f64,
    candidates: Option<&[usize]>,
) -> Result<PairSelection> {
    if !(tau_pl < tau_pu) {
        return Err(Error::InvalidInput(format!(
            "need tau_pl < tau_pu, got {tau_pl} and {tau_pu}"
        )));
    }
    let all: Vec<usize>;
    let rows = match candidates {
        Some(c) => c,
        None => {
            all = (0..embs.nrows()).collect();
            &all
        }
    };
    let mut sel = PairSelection::default();
    for (a, &i) in rows.iter().enumerate() {
        for &j in &rows[a + 1..] {
            let (i, j) = (i.min(j), i.max(j));
            let s = similarity_unit(embs.row(i), embs.row(j)).cosine;
            if s >= tau_pu {
                sel.pairs.push((i, j, 1));
                sel.positives += 1;
            } else if s < tau_pl {
                sel.pairs.push((i, j, 0));
                sel.negatives += 1;
            } else {
                sel.ambiguous += 1;
            }
        }
    }
    Ok(sel)
}

/// Mean BCE over the selected pairs; zero with zero gradient when none.
pub fn target_pairwise_loss(
    embs: ArrayView2<f64>,
    selection: &PairSelection,
) -> Result<PairLossOutput> {
    if let Some(&(i, j, _)) = selection
        .pairs
        .iter()
        .find(|(i, j, _)| *i >= embs.nrows() || *j >= embs.nrows() || i == j)
    {
        return Err(Error::InvalidInput(format!(
            "pair ({i}, {j}) invalid for {} rows",
            embs.nrows()
        )));
    }
    if selection.is_empty() {
        return Ok(PairLossOutput {
            value: 0.0,
            grad: Array2::zeros(embs.raw_dim()),
        });
    }
    let pairs: Vec<(usize, usize, f64)> = selection
        .pairs
        .iter()
        .map(|&(i, j, z)| (i, j, f64::from(z)))
        .collect();
    Ok(pair_bce(embs, &pairs, 1.0 / pairs.len() as f64))
}
