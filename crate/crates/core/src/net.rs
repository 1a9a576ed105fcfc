//! Two-hidden-layer ReLU network with dropout, softmax classifier head,
//! hand-written backpropagation and heavy-ball SGD.
//!
//! ```text
//! x ─W1,b1─ z1 ─ReLU─ a1 ─drop─ h1 ─W2,b2─ z2 ─ReLU─ a2 ─drop─ W_c,b_c ─ logits
//!                                                     │
//!                                                embedding
//! ```
//!
//! The embedding consumed by the alignment and similarity losses is `a2`, the
//! post-ReLU output of the second layer; dropout after it only feeds the
//! classifier.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng as _;
use rand_distr::{Distribution, Uniform};

use crate::datamodel::Standardizer;
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Network weights. Also used as the gradient and velocity container.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
    pub wc: Array2<f64>,
    pub bc: Array1<f64>,
}

/// Gradients share the parameter layout.
pub type Gradients = MlpParams;

impl MlpParams {
    pub fn zeros(input: usize, h1: usize, h2: usize, classes: usize) -> Self {
        Self {
            w1: Array2::zeros((input, h1)),
            b1: Array1::zeros(h1),
            w2: Array2::zeros((h1, h2)),
            b2: Array1::zeros(h2),
            wc: Array2::zeros((h2, classes)),
            bc: Array1::zeros(classes),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let (d, h1, h2, c) = self.dims();
        Self::zeros(d, h1, h2, c)
    }

    /// `(input, hidden1, hidden2, classes)`.
    pub fn dims(&self) -> (usize, usize, usize, usize) {
        (
            self.w1.nrows(),
            self.w1.ncols(),
            self.w2.ncols(),
            self.wc.ncols(),
        )
    }

    pub fn input_dim(&self) -> usize {
        self.w1.nrows()
    }

    pub fn embedding_dim(&self) -> usize {
        self.w2.ncols()
    }

    pub fn num_classes(&self) -> usize {
        self.wc.ncols()
    }

    /// Every tensor as a flat slice, in declaration order.
    pub fn slices(&self) -> [&[f64]; 6] {
        [
            self.w1.as_slice().expect("standard layout"),
            self.b1.as_slice().expect("standard layout"),
            self.w2.as_slice().expect("standard layout"),
            self.b2.as_slice().expect("standard layout"),
            self.wc.as_slice().expect("standard layout"),
            self.bc.as_slice().expect("standard layout"),
        ]
    }

    pub fn slices_mut(&mut self) -> [&mut [f64]; 6] {
        [
            self.w1.as_slice_mut().expect("standard layout"),
            self.b1.as_slice_mut().expect("standard layout"),
            self.w2.as_slice_mut().expect("standard layout"),
            self.b2.as_slice_mut().expect("standard layout"),
            self.wc.as_slice_mut().expect("standard layout"),
            self.bc.as_slice_mut().expect("standard layout"),
        ]
    }

    pub fn add_assign(&mut self, other: &MlpParams) {
        for (a, b) in self.slices_mut().into_iter().zip(other.slices()) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.slices()
            .iter()
            .all(|s| s.iter().all(|v| v.is_finite()))
    }

    fn same_shape(&self, other: &MlpParams) -> bool {
        self.dims() == other.dims()
    }
}

/// Glorot-uniform weights, zero biases.
pub fn init_params(input: usize, h1: usize, h2: usize, classes: usize, rng: &mut Rng) -> MlpParams {
    fn glorot(rows: usize, cols: usize, rng: &mut Rng) -> Array2<f64> {
        let bound = (6.0 / (rows + cols) as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        Array2::from_shape_simple_fn((rows, cols), || dist.sample(rng))
    }
    let mut p = MlpParams::zeros(input, h1, h2, classes);
    p.w1 = glorot(input, h1, rng);
    p.w2 = glorot(h1, h2, rng);
    p.wc = glorot(h2, classes, rng);
    p
}

/// Everything the backward pass needs from one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache {
    pub input: Array2<f64>,
    pub z1: Array2<f64>,
    /// Inverted-dropout multipliers (0 or 1/(1−p)); all ones in eval mode.
    pub mask1: Array2<f64>,
    pub h1: Array2<f64>,
    pub z2: Array2<f64>,
    /// Post-ReLU second-layer output: the embedding.
    pub embedding: Array2<f64>,
    pub mask2: Array2<f64>,
    pub logits: Array2<f64>,
    pub probs: Array2<f64>,
}

impl ForwardCache {
    pub fn batch_size(&self) -> usize {
        self.input.nrows()
    }
}

fn dropout_mask(
    rows: usize,
    cols: usize,
    p: f64,
    mode: Mode,
    rng: Option<&mut Rng>,
) -> Array2<f64> {
    match (mode, rng) {
        (Mode::Train, Some(rng)) if p > 0.0 => {
            let keep = 1.0 / (1.0 - p);
            Array2::from_shape_simple_fn((rows, cols), || {
                if rng.random::<f64>() < p {
                    0.0
                } else {
                    keep
                }
            })
        }
        _ => Array2::ones((rows, cols)),
    }
}

/// Row-wise softmax with the max subtracted first.
pub fn softmax(logits: &Array2<f64>) -> Array2<f64> {
    let mut p = logits.clone();
    for mut row in p.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
    p
}

/// Forward pass. In train mode with `p > 0` an RNG is required for dropout.
pub fn forward(
    params: &MlpParams,
    batch: ArrayView2<f64>,
    mode: Mode,
    dropout: f64,
    mut rng: Option<&mut Rng>,
) -> Result<ForwardCache> {
    if batch.ncols() != params.input_dim() {
        return Err(Error::shape(
            format!("batch width {}", params.input_dim()),
            batch.ncols(),
        ));
    }
    if mode == Mode::Train && dropout > 0.0 && rng.is_none() {
        return Err(Error::InvalidInput(
            "train-mode dropout needs an RNG".into(),
        ));
    }
    let b = batch.nrows();
    let input = batch.to_owned();

    let z1 = input.dot(&params.w1) + &params.b1;
    let mask1 = dropout_mask(b, params.w1.ncols(), dropout, mode, rng.as_deref_mut());
    let h1 = z1.mapv(|v| v.max(0.0)) * &mask1;

    let z2 = h1.dot(&params.w2) + &params.b2;
    let embedding = z2.mapv(|v| v.max(0.0));
    let mask2 = dropout_mask(b, params.w2.ncols(), dropout, mode, rng);

    let logits = (&embedding * &mask2).dot(&params.wc) + &params.bc;
    let probs = softmax(&logits);
    Ok(ForwardCache {
        input,
        z1,
        mask1,
        h1,
        z2,
        embedding,
        mask2,
        logits,
        probs,
    })
}

/// Mean cross-entropy over the batch and its gradient w.r.t. the logits.
pub fn cross_entropy_loss(cache: &ForwardCache, labels: &[usize]) -> Result<(f64, Array2<f64>)> {
    let b = cache.batch_size();
    if b == 0 {
        return Err(Error::InvalidInput(
            "cross-entropy of an empty batch".into(),
        ));
    }
    if labels.len() != b {
        return Err(Error::shape(format!("{b} labels"), labels.len()));
    }
    let c = cache.logits.ncols();
    let mut loss = 0.0;
    let mut grad = cache.probs.clone();
    for (i, (&y, row)) in labels.iter().zip(cache.logits.rows()).enumerate() {
        if y >= c {
            return Err(Error::InvalidInput(format!("label {y} >= num_classes {c}")));
        }
        let m = row.fold(f64::NEG_INFINITY, |a, &v| a.max(v));
        let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        loss += lse - row[y];
        grad[[i, y]] -= 1.0;
    }
    grad /= b as f64;
    Ok((loss / b as f64, grad))
}

/// Backpropagates upstream gradients w.r.t. the logits and/or the embedding.
pub fn backward(
    params: &MlpParams,
    cache: &ForwardCache,
    d_logits: Option<ArrayView2<f64>>,
    d_embedding: Option<ArrayView2<f64>>,
) -> Result<Gradients> {
    let b = cache.batch_size();
    let (d, h1, h2, c) = params.dims();
    if cache.input.ncols() != d || cache.embedding.ncols() != h2 || cache.z1.ncols() != h1 {
        return Err(Error::shape(
            format!("cache for network {d}-{h1}-{h2}-{c}"),
            format!(
                "cache {}-{}-{}",
                cache.input.ncols(),
                cache.z1.ncols(),
                cache.embedding.ncols()
            ),
        ));
    }
    let mut g = params.zeros_like();

    let mut d_a2 = Array2::<f64>::zeros((b, h2));
    if let Some(dl) = d_logits {
        if dl.dim() != (b, c) {
            return Err(Error::shape(
                format!("logit gradient {b}x{c}"),
                format!("{:?}", dl.dim()),
            ));
        }
        let dropped = &cache.embedding * &cache.mask2;
        g.wc = dropped.t().dot(&dl);
        g.bc = dl.sum_axis(Axis(0));
        d_a2 = dl.dot(&params.wc.t()) * &cache.mask2;
    }
    if let Some(de) = d_embedding {
        if de.dim() != (b, h2) {
            return Err(Error::shape(
                format!("embedding gradient {b}x{h2}"),
                format!("{:?}", de.dim()),
            ));
        }
        d_a2 += &de;
    }

    let mut d_z2 = d_a2;
    Zip::from(&mut d_z2).and(&cache.z2).for_each(|g, &z| {
        if z <= 0.0 {
            *g = 0.0;
        }
    });
    g.w2 = cache.h1.t().dot(&d_z2);
    g.b2 = d_z2.sum_axis(Axis(0));

    let mut d_z1 = d_z2.dot(&params.w2.t()) * &cache.mask1;
    Zip::from(&mut d_z1).and(&cache.z1).for_each(|g, &z| {
        if z <= 0.0 {
            *g = 0.0;
        }
    });
    g.w1 = cache.input.t().dot(&d_z1);
    g.b1 = d_z1.sum_axis(Axis(0));
    Ok(g)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub velocity: MlpParams,
    pub learning_rate: f64,
    pub momentum: f64,
}

impl OptimizerState {
    pub fn new(params: &MlpParams, learning_rate: f64, momentum: f64) -> Self {
        Self {
            velocity: params.zeros_like(),
            learning_rate,
            momentum,
        }
    }
}

/// Heavy-ball update: `v ← μ·v + g`, `θ ← θ − lr·v`.
pub fn sgd_step(
    params: &mut MlpParams,
    grads: &Gradients,
    state: &mut OptimizerState,
) -> Result<()> {
    if !params.same_shape(grads) || !params.same_shape(&state.velocity) {
        return Err(Error::shape(
            format!("{:?}", params.dims()),
            format!("{:?}", grads.dims()),
        ));
    }
    let (lr, mu) = (state.learning_rate, state.momentum);
    for ((p, g), v) in params
        .slices_mut()
        .into_iter()
        .zip(grads.slices())
        .zip(state.velocity.slices_mut())
    {
        for ((p, g), v) in p.iter_mut().zip(g).zip(v.iter_mut()) {
            *v = mu * *v + g;
            *p -= lr * *v;
        }
    }
    Ok(())
}

const CHECKPOINT_MAGIC: &str = "sdcnet-checkpoint";
const CHECKPOINT_VERSION: u32 = 1;
const TENSOR_NAMES: [&str; 6] = ["w1", "b1", "w2", "b2", "wc", "bc"];

/// Yields the line number and fields of the next line, checking its key.
type NextLine<'a> = dyn FnMut(&str) -> Result<(usize, Vec<String>)> + 'a;

/// A trained model as written to disk: weights, the feature standardizer the
/// weights expect, and optionally the optimizer velocity for resuming.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: MlpParams,
    pub dropout: f64,
    pub standardizer: Option<Standardizer>,
    pub velocity: Option<MlpParams>,
}

fn write_tensor(out: &mut String, name: &str, values: &[f64]) {
    out.push_str(name);
    for v in values {
        let _ = write!(out, " {v:.16e}");
    }
    out.push('\n');
}

impl Checkpoint {
    /// Text format, one tensor per line, values row-major:
    ///
    /// ```text
    /// sdcnet-checkpoint 1
    /// dims <input> <hidden1> <hidden2> <classes>
    /// dropout <p>
    /// standardizer <0|1>
    /// [mean ... / scale ...]        when standardizer is 1
    /// w1 ... / b1 ... / w2 ... / b2 ... / wc ... / bc ...
    /// velocity <0|1>
    /// [w1 ... bc ...]               when velocity is 1
    /// ```
    pub fn to_text(&self) -> String {
        let (d, h1, h2, c) = self.params.dims();
        let mut s = String::new();
        let _ = writeln!(s, "{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}");
        let _ = writeln!(s, "dims {d} {h1} {h2} {c}");
        let _ = writeln!(s, "dropout {:.16e}", self.dropout);
        match &self.standardizer {
            Some(st) => {
                s.push_str("standardizer 1\n");
                write_tensor(&mut s, "mean", &st.mean);
                write_tensor(&mut s, "scale", &st.scale);
            }
            None => s.push_str("standardizer 0\n"),
        }
        for (name, t) in TENSOR_NAMES.iter().zip(self.params.slices()) {
            write_tensor(&mut s, name, t);
        }
        match &self.velocity {
            Some(v) => {
                s.push_str("velocity 1\n");
                for (name, t) in TENSOR_NAMES.iter().zip(v.slices()) {
                    write_tensor(&mut s, name, t);
                }
            }
            None => s.push_str("velocity 0\n"),
        }
        s
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let err = |line: usize, message: String| Error::Format {
            path: origin.to_string(),
            line,
            message,
        };
        let mut next = |key: &str| -> Result<(usize, Vec<String>)> {
            let (n, l) = lines
                .next()
                .ok_or_else(|| err(0, format!("unexpected end of file, wanted {key}")))?;
            let mut parts = l.split_whitespace();
            match parts.next() {
                Some(k) if k == key => Ok((n, parts.map(str::to_string).collect())),
                other => Err(err(n, format!("expected {key:?}, found {other:?}"))),
            }
        };
        let nums = |n: usize, v: &[String], want: usize| -> Result<Vec<f64>> {
            if v.len() != want {
                return Err(err(n, format!("expected {want} values, found {}", v.len())));
            }
            v.iter()
                .map(|x| x.parse::<f64>().map_err(|e| err(n, e.to_string())))
                .collect()
        };
        let (n, v) = next(CHECKPOINT_MAGIC)?;
        if v != [CHECKPOINT_VERSION.to_string()] {
            return Err(err(n, format!("unsupported checkpoint version {v:?}")));
        }
        let (n, v) = next("dims")?;
        let dims: Vec<usize> = v
            .iter()
            .map(|x| x.parse().map_err(|e| err(n, format!("{e}"))))
            .collect::<Result<_>>()?;
        let [d, h1, h2, c] = dims[..] else {
            return Err(err(n, "dims needs 4 values".into()));
        };
        let (n, v) = next("dropout")?;
        let dropout = nums(n, &v, 1)?[0];
        let (n, v) = next("standardizer")?;
        let standardizer = match v.first().map(String::as_str) {
            Some("1") => {
                let (n, m) = next("mean")?;
                let mean = nums(n, &m, d)?;
                let (n, s) = next("scale")?;
                let scale = nums(n, &s, d)?;
                Some(Standardizer { mean, scale })
            }
            Some("0") => None,
            _ => return Err(err(n, "standardizer flag must be 0 or 1".into())),
        };
        let read_params = |next: &mut NextLine<'_>| -> Result<MlpParams> {
            let mut p = MlpParams::zeros(d, h1, h2, c);
            for (name, slot) in TENSOR_NAMES.iter().zip(p.slices_mut()) {
                let (n, v) = next(name)?;
                let vals = nums(n, &v, slot.len())?;
                slot.copy_from_slice(&vals);
            }
            Ok(p)
        };
        let params = read_params(&mut next)?;
        let (n, v) = next("velocity")?;
        let velocity = match v.first().map(String::as_str) {
            Some("1") => Some(read_params(&mut next)?),
            Some("0") => None,
            _ => return Err(err(n, "velocity flag must be 0 or 1".into())),
        };
        Ok(Self {
            params,
            dropout,
            standardizer,
            velocity,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Eval-mode forward on raw (unstandardized) features.
    pub fn forward_eval(&self, features: ArrayView2<f64>) -> Result<ForwardCache> {
        match &self.standardizer {
            Some(st) => {
                let mut x = features.to_owned();
                for mut row in x.rows_mut() {
                    for ((v, m), s) in row.iter_mut().zip(&st.mean).zip(&st.scale) {
                        *v = (*v - m) / s;
                    }
                }
                forward(&self.params, x.view(), Mode::Eval, 0.0, None)
            }
            None => forward(&self.params, features, Mode::Eval, 0.0, None),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{self, Stream};
    use ndarray::array;

    fn small(seed: u64) -> MlpParams {
        init_params(6, 4, 4, 3, &mut rng::stream(seed, Stream::Init))
    }

    fn batch() -> Array2<f64> {
        Array2::from_shape_fn((5, 6), |(i, j)| ((i * 7 + j * 3) as f64 * 0.37).sin())
    }

    #[test]
    fn zero_network_gives_uniform_softmax() {
        let p = MlpParams::zeros(6, 4, 4, 3);
        let c = forward(&p, batch().view(), Mode::Eval, 0.25, None).unwrap();
        assert!(c.logits.iter().all(|&v| v == 0.0));
        assert!(c.probs.iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn eval_forward_is_pure() {
        let p = small(1);
        let a = forward(&p, batch().view(), Mode::Eval, 0.25, None).unwrap();
        let b = forward(&p, batch().view(), Mode::Eval, 0.25, None).unwrap();
        assert_eq!(a, b);
        for row in a.probs.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_shift_invariance() {
        let l = array![[1.0, 2.0, -3.0], [100.0, 101.0, 99.0]];
        let shifted = &l + &array![[5.0], [-40.0]];
        let d = softmax(&l) - softmax(&shifted);
        assert!(d.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn dropout_rate() {
        let p = MlpParams::zeros(1, 10_000, 1, 1);
        let mut r = rng::stream(3, Stream::SourceDropout);
        let c = forward(
            &p,
            Array2::zeros((1, 1)).view(),
            Mode::Train,
            0.25,
            Some(&mut r),
        )
        .unwrap();
        let dropped = c.mask1.iter().filter(|&&m| m == 0.0).count() as f64 / 10_000.0;
        assert!((dropped - 0.25).abs() < 0.02, "{dropped}");
        assert!(c
            .mask1
            .iter()
            .all(|&m| m == 0.0 || (m - 1.0 / 0.75).abs() < 1e-15));
    }

    #[test]
    fn cross_entropy_values() {
        let p = MlpParams::zeros(6, 4, 4, 3);
        let c = forward(&p, batch().view(), Mode::Eval, 0.0, None).unwrap();
        let (l, _) = cross_entropy_loss(&c, &[0, 1, 2, 0, 1]).unwrap();
        assert!((l - 3f64.ln()).abs() < 1e-12);

        let mut c2 = c.clone();
        c2.logits = array![[0.5f64.ln(), 0.5f64.ln()], [0.25f64.ln(), 0.75f64.ln()]];
        c2.probs = softmax(&c2.logits);
        c2.input = Array2::zeros((2, 6));
        let (l, _) = cross_entropy_loss(&c2, &[0, 0]).unwrap();
        assert!((l - 1.0397207708399179).abs() < 1e-12);

        c2.logits = array![[0.0, -1e3], [-1e3, 0.0]];
        c2.probs = softmax(&c2.logits);
        let (l, _) = cross_entropy_loss(&c2, &[0, 1]).unwrap();
        assert!(l.abs() < 1e-12);
    }

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        let p = small(2);
        let c = forward(&p, batch().view(), Mode::Eval, 0.0, None).unwrap();
        let z = Array2::zeros((5, 3));
        let g = backward(&p, &c, Some(z.view()), None).unwrap();
        assert!(g.slices().iter().all(|s| s.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn dead_relu_unit_gets_no_gradient() {
        let mut p = small(4);
        // Unit 0 of layer 1 can never fire.
        p.w1.column_mut(0).fill(0.0);
        p.b1[0] = -1.0;
        let c = forward(&p, batch().view(), Mode::Eval, 0.0, None).unwrap();
        let (_, dl) = cross_entropy_loss(&c, &[0, 1, 2, 0, 1]).unwrap();
        let g = backward(&p, &c, Some(dl.view()), None).unwrap();
        assert!(g.w1.column(0).iter().all(|&v| v == 0.0));
        assert_eq!(g.b1[0], 0.0);
    }

    #[test]
    fn sgd_scalar_recurrences() {
        let mut p = MlpParams::zeros(1, 1, 1, 1);
        let mut g = p.zeros_like();
        g.bc[0] = 1.0;
        let mut st = OptimizerState::new(&p, 0.1, 0.0);
        sgd_step(&mut p, &g, &mut st).unwrap();
        assert!((p.bc[0] + 0.1).abs() < 1e-15);

        let mut p = MlpParams::zeros(1, 1, 1, 1);
        let mut st = OptimizerState::new(&p, 0.1, 0.9);
        sgd_step(&mut p, &g, &mut st).unwrap();
        sgd_step(&mut p, &g, &mut st).unwrap();
        assert!((p.bc[0] + 0.29).abs() < 1e-12);

        // Zero gradient afterwards: the step shrinks geometrically.
        let zero = p.zeros_like();
        let mut prev = p.bc[0];
        for k in 1..20 {
            sgd_step(&mut p, &zero, &mut st).unwrap();
            let step = (p.bc[0] - prev).abs();
            assert!(step <= 0.1 * 1.9 * 0.9f64.powi(k) + 1e-15);
            prev = p.bc[0];
        }
    }

    #[test]
    fn glorot_bounds_and_seeding() {
        let mut r = rng::stream(0, Stream::Init);
        let p = init_params(310, 64, 64, 3, &mut r);
        let bound = (6.0f64 / 374.0).sqrt();
        assert!(p.w1.iter().all(|w| w.abs() <= bound));
        assert!(p.b1.iter().all(|&b| b == 0.0));
        assert_eq!(small(9), small(9));
        assert_ne!(small(9), small(10));
    }

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let p = small(5);
        let ck = Checkpoint {
            params: p.clone(),
            dropout: 0.25,
            standardizer: Some(Standardizer {
                mean: vec![0.1; 6],
                scale: vec![1.0 / 3.0; 6],
            }),
            velocity: Some(small(6)),
        };
        let back = Checkpoint::parse(&ck.to_text(), "mem").unwrap();
        assert_eq!(back, ck);
        let bare = Checkpoint {
            standardizer: None,
            velocity: None,
            ..ck
        };
        assert_eq!(Checkpoint::parse(&bare.to_text(), "mem").unwrap(), bare);
        assert!(Checkpoint::parse("sdcnet-checkpoint 9\n", "mem").is_err());
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let p = small(1);
        assert!(forward(&p, Array2::zeros((2, 5)).view(), Mode::Eval, 0.0, None).is_err());
    }
}
