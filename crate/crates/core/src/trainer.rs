//! Loss composition, schedules and the training loop.
//!
//! Per step the objective is
//!
//! ```text
//! L = L_ds + α·L_mmd + β·L_cmmd + β·L_pt + λ·L_ps
//! ```
//!
//! with α ramped down linearly over epochs, β a step function of the current
//! batch's classification loss, and λ = 2e/epochs. `swap_lambda_beta_pt`
//! exchanges the weights of the two pairwise terms.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};
use serde::Serialize;

use crate::align::{self, CmmdOptions, KernelBank};
use crate::augment::{self, MixPolicy};
use crate::datamodel::{DomainSplit, RunConfig, Standardizer};
use crate::dscl;
use crate::error::{Error, Result};
use crate::eval::{self, ConfusionMatrix};
use crate::net::{self, Checkpoint, MlpParams, Mode, OptimizerState};
use crate::rng::{self, Rng, Stream};

fn heaviside(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Linear ramp from `start` (epoch 0) to `end` (epoch `epochs − 1`).
fn ramp(start: f64, end: f64, epoch: usize, epochs: usize) -> f64 {
    if epochs <= 1 {
        return start;
    }
    let v = start + (end - start) * epoch as f64 / (epochs - 1) as f64;
    v.clamp(start.min(end), start.max(end))
}

pub fn alpha_schedule(epoch: usize, config: &RunConfig) -> f64 {
    ramp(config.alpha_start, config.alpha_end, epoch, config.epochs)
}

/// `β = H(ρ0 − L) + ½·H(L − ρ0)·H(ρ1 − L)` with `H(0) = 1`.
///
/// 1 below ρ0, 1.5 exactly at ρ0, 0.5 on (ρ0, ρ1], 0 above ρ1.
pub fn beta_from_loss(l_ds: f64, rho0: f64, rho1: f64) -> f64 {
    heaviside(rho0 - l_ds) + 0.5 * heaviside(l_ds - rho0) * heaviside(rho1 - l_ds)
}

/// `λ = 2e/epochs`.
pub fn lambda_schedule(epoch: usize, epochs: usize) -> f64 {
    2.0 * epoch as f64 / epochs as f64
}

/// Pseudo-label gate and the two pair-selection thresholds for one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TauSchedule {
    pub tau: f64,
    pub tau_pu: f64,
    pub tau_pl: f64,
}

pub fn tau_schedules(epoch: usize, config: &RunConfig) -> TauSchedule {
    let e = config.epochs;
    TauSchedule {
        tau: ramp(config.tau_start, config.tau_end, epoch, e),
        tau_pu: ramp(config.tau_pu_start, config.tau_pu_end, epoch, e),
        tau_pl: ramp(config.tau_pl_start, config.tau_pl_end, epoch, e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
}

/// Every loss term of one step and what they were weighted by.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossBreakdown {
    pub l_ds: f64,
    pub l_mmd: f64,
    pub l_cmmd: f64,
    pub l_ps: f64,
    pub l_pt: f64,
    pub weights: LossWeights,
    pub swap_lambda_beta_pt: bool,
    pub accepted_pseudo_count: usize,
    pub target_rows: usize,
    pub participating_classes: usize,
    pub pair_positives: usize,
    pub pair_negatives: usize,
    pub pair_ambiguous: usize,
    pub total: f64,
}

impl LossBreakdown {
    /// Weights actually applied to `(l_pt, l_ps)`.
    pub fn pairwise_weights(&self) -> (f64, f64) {
        let w = self.weights;
        if self.swap_lambda_beta_pt {
            (w.lambda, w.beta)
        } else {
            (w.beta, w.lambda)
        }
    }

    pub fn weighted_sum(&self) -> f64 {
        let w = self.weights;
        let (w_pt, w_ps) = self.pairwise_weights();
        self.l_ds
            + w.alpha * self.l_mmd
            + w.beta * self.l_cmmd
            + w_pt * self.l_pt
            + w_ps * self.l_ps
    }
}

/// Schedule values and kernels shared by every step of an epoch.
#[derive(Debug, Clone)]
pub struct StepContext {
    pub epoch: usize,
    pub alpha: f64,
    pub lambda: f64,
    pub taus: TauSchedule,
    /// Required when MMD or CMMD is enabled.
    pub bank: Option<KernelBank>,
}

impl StepContext {
    pub fn for_epoch(epoch: usize, config: &RunConfig, bank: Option<KernelBank>) -> Self {
        Self {
            epoch,
            alpha: alpha_schedule(epoch, config),
            lambda: lambda_schedule(epoch, config.epochs),
            taus: tau_schedules(epoch, config),
            bank,
        }
    }
}

/// Mutable training state: model, optimizer and the RNG streams.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub config: RunConfig,
    pub num_classes: usize,
    pub params: MlpParams,
    pub optimizer: OptimizerState,
    pub step: usize,
    source_dropout: Rng,
    target_dropout: Rng,
}

impl TrainState {
    pub fn new(config: &RunConfig, input_dim: usize, num_classes: usize) -> Self {
        let mut init = rng::stream(config.seed, Stream::Init);
        let (h1, h2) = config.hidden_dims;
        let params = net::init_params(input_dim, h1, h2, num_classes, &mut init);
        Self::with_params(config, params)
    }

    pub fn with_params(config: &RunConfig, params: MlpParams) -> Self {
        let optimizer = OptimizerState::new(&params, config.learning_rate, config.momentum);
        Self {
            config: config.clone(),
            num_classes: params.num_classes(),
            params,
            optimizer,
            step: 0,
            source_dropout: rng::stream(config.seed, Stream::SourceDropout),
            target_dropout: rng::stream(config.seed, Stream::TargetDropout),
        }
    }
}

/// One optimization step on a source batch and a target batch.
pub fn train_step(
    state: &mut TrainState,
    source_x: ArrayView2<f64>,
    source_y: &[usize],
    target_x: ArrayView2<f64>,
    ctx: &StepContext,
) -> Result<LossBreakdown> {
    let cfg = &state.config;
    let p = cfg.dropout;
    let src = net::forward(
        &state.params,
        source_x,
        Mode::Train,
        p,
        Some(&mut state.source_dropout),
    )?;
    let (l_ds, d_logits) = net::cross_entropy_loss(&src, source_y)?;
    let beta = beta_from_loss(l_ds, cfg.rho0, cfg.rho1);
    let (w_pt, w_ps) = if cfg.swap_lambda_beta_pt {
        (ctx.lambda, beta)
    } else {
        (beta, ctx.lambda)
    };

    let mut b = LossBreakdown {
        l_ds,
        l_mmd: 0.0,
        l_cmmd: 0.0,
        l_ps: 0.0,
        l_pt: 0.0,
        weights: LossWeights {
            alpha: ctx.alpha,
            beta,
            lambda: ctx.lambda,
        },
        swap_lambda_beta_pt: cfg.swap_lambda_beta_pt,
        accepted_pseudo_count: 0,
        target_rows: 0,
        participating_classes: 0,
        pair_positives: 0,
        pair_negatives: 0,
        pair_ambiguous: 0,
        total: 0.0,
    };

    let h2 = state.params.embedding_dim();
    let mut d_src_emb = Array2::<f64>::zeros((source_x.nrows(), h2));
    let mut target_grads = None;

    let needs_target = cfg.use_mmd || cfg.use_cmmd || cfg.use_dscl_target;
    if needs_target && target_x.nrows() > 0 {
        let bank = || {
            ctx.bank
                .as_ref()
                .ok_or_else(|| Error::InvalidInput("MMD/CMMD enabled without a kernel bank".into()))
        };
        let tgt = net::forward(
            &state.params,
            target_x,
            Mode::Train,
            p,
            Some(&mut state.target_dropout),
        )?;
        let mut d_tgt_emb = Array2::<f64>::zeros((target_x.nrows(), h2));
        b.target_rows = target_x.nrows();

        if cfg.use_mmd {
            let out = align::mmd2(src.embedding.view(), tgt.embedding.view(), bank()?)?;
            b.l_mmd = out.value;
            d_src_emb.scaled_add(ctx.alpha, &out.grad_source);
            d_tgt_emb.scaled_add(ctx.alpha, &out.grad_target);
        }

        let wants_pseudo = cfg.use_cmmd || (cfg.use_dscl_target && cfg.target_pairs_accepted_only);
        let pseudo = if wants_pseudo {
            let eval = net::forward(&state.params, target_x, Mode::Eval, 0.0, None)?;
            let gate = if cfg.use_pseudo_confidence {
                ctx.taus.tau
            } else {
                0.0
            };
            let set = align::filter_pseudo_labels(eval.probs.view(), gate);
            b.accepted_pseudo_count = set.len();
            Some(set)
        } else {
            None
        };

        if cfg.use_cmmd {
            let pseudo = pseudo.as_ref().expect("computed above");
            let out = align::cmmd2(
                src.embedding.view(),
                source_y,
                tgt.embedding.view(),
                pseudo,
                bank()?,
                state.num_classes,
                CmmdOptions {
                    class_mean: cfg.cmmd_class_mean,
                    prior_weighting: cfg.cmmd_prior_weighting,
                },
            )?;
            b.l_cmmd = out.value;
            b.participating_classes = out.participating_classes;
            d_src_emb.scaled_add(beta, &out.grad_source);
            d_tgt_emb.scaled_add(beta, &out.grad_target);
        }

        if cfg.use_dscl_target {
            let candidates = if cfg.target_pairs_accepted_only {
                pseudo.as_ref().map(|s| s.indices.as_slice())
            } else {
                None
            };
            let sel = dscl::target_pair_selection(
                tgt.embedding.view(),
                ctx.taus.tau_pu,
                ctx.taus.tau_pl,
                candidates,
            )?;
            b.pair_positives = sel.positives;
            b.pair_negatives = sel.negatives;
            b.pair_ambiguous = sel.ambiguous;
            let out = dscl::target_pairwise_loss(tgt.embedding.view(), &sel)?;
            b.l_pt = out.value;
            d_tgt_emb.scaled_add(w_pt, &out.grad);
        }

        target_grads = Some(net::backward(
            &state.params,
            &tgt,
            None,
            Some(d_tgt_emb.view()),
        )?);
    }

    if cfg.use_dscl_source && source_x.nrows() >= 2 {
        let out = dscl::source_pairwise_loss(src.embedding.view(), source_y)?;
        b.l_ps = out.value;
        d_src_emb.scaled_add(w_ps, &out.grad);
    }

    b.total = b.weighted_sum();

    let mut grads = net::backward(
        &state.params,
        &src,
        Some(d_logits.view()),
        Some(d_src_emb.view()),
    )?;
    if let Some(g) = target_grads {
        grads.add_assign(&g);
    }
    net::sgd_step(&mut state.params, &grads, &mut state.optimizer)?;
    state.step += 1;
    Ok(b)
}

/// Per-epoch means of the step breakdowns plus target accuracy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub steps: usize,
    pub alpha: f64,
    pub lambda: f64,
    pub tau: f64,
    pub tau_pu: f64,
    pub tau_pl: f64,
    pub mean_beta: f64,
    pub l_ds: f64,
    pub l_mmd: f64,
    pub l_cmmd: f64,
    pub l_ps: f64,
    pub l_pt: f64,
    pub total: f64,
    pub pseudo_acceptance_rate: f64,
    pub mean_participating_classes: f64,
    pub pair_positives: usize,
    pub pair_negatives: usize,
    pub pair_ambiguous: usize,
    pub target_accuracy: f64,
}

impl EpochLog {
    fn from_steps(ctx: &StepContext, steps: &[LossBreakdown], target_accuracy: f64) -> Self {
        let n = steps.len().max(1) as f64;
        let mean = |f: fn(&LossBreakdown) -> f64| steps.iter().map(f).sum::<f64>() / n;
        let target_rows: usize = steps.iter().map(|s| s.target_rows).sum();
        let accepted: usize = steps.iter().map(|s| s.accepted_pseudo_count).sum();
        Self {
            epoch: ctx.epoch,
            steps: steps.len(),
            alpha: ctx.alpha,
            lambda: ctx.lambda,
            tau: ctx.taus.tau,
            tau_pu: ctx.taus.tau_pu,
            tau_pl: ctx.taus.tau_pl,
            mean_beta: mean(|s| s.weights.beta),
            l_ds: mean(|s| s.l_ds),
            l_mmd: mean(|s| s.l_mmd),
            l_cmmd: mean(|s| s.l_cmmd),
            l_ps: mean(|s| s.l_ps),
            l_pt: mean(|s| s.l_pt),
            total: mean(|s| s.total),
            pseudo_acceptance_rate: if target_rows == 0 {
                0.0
            } else {
                accepted as f64 / target_rows as f64
            },
            mean_participating_classes: mean(|s| s.participating_classes as f64),
            pair_positives: steps.iter().map(|s| s.pair_positives).sum(),
            pair_negatives: steps.iter().map(|s| s.pair_negatives).sum(),
            pair_ambiguous: steps.iter().map(|s| s.pair_ambiguous).sum(),
            target_accuracy,
        }
    }
}

/// JSON-lines rendering, one object per epoch.
pub fn render_epoch_log(logs: &[EpochLog]) -> String {
    let mut s = String::new();
    for l in logs {
        let _ = writeln!(
            s,
            "{}",
            serde_json::to_string(l).expect("plain data serializes")
        );
    }
    s
}

pub fn write_epoch_log(logs: &[EpochLog], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, render_epoch_log(logs)).map_err(|e| Error::io(path, e))
}

/// Outcome of [`fit`] on one split.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub checkpoint: Checkpoint,
    pub epochs: Vec<EpochLog>,
    pub steps: usize,
    pub target_accuracy: f64,
    pub confusion: ConfusionMatrix,
}

/// Cycles through a permutation of `0..n`, reshuffling on exhaustion.
struct CyclingSampler {
    order: Vec<usize>,
    pos: usize,
    rng: Rng,
}

impl CyclingSampler {
    fn new(n: usize, mut rng: Rng) -> Self {
        let mut order: Vec<usize> = (0..n).collect();
        rng::shuffle(&mut order, &mut rng);
        Self { order, pos: 0, rng }
    }

    fn take(&mut self, k: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(k);
        while out.len() < k {
            if self.pos == self.order.len() {
                rng::shuffle(&mut self.order, &mut self.rng);
                self.pos = 0;
            }
            out.push(self.order[self.pos]);
            self.pos += 1;
        }
        out
    }
}

/// Bandwidths around the median pairwise distance of (a sample of) the
/// current eval-mode source embeddings.
fn refresh_bank(
    params: &MlpParams,
    source_x: &Array2<f64>,
    config: &RunConfig,
    rng: &mut Rng,
) -> Result<KernelBank> {
    let mut idx: Vec<usize> = (0..source_x.nrows()).collect();
    rng::shuffle(&mut idx, rng);
    idx.truncate(config.kernel_sample_size);
    idx.sort_unstable();
    let sample = source_x.select(Axis(0), &idx);
    let emb = net::forward(params, sample.view(), Mode::Eval, 0.0, None)?.embedding;
    let sigma = align::median_heuristic(emb.view())?;
    KernelBank::around(sigma, config.kernel_count)
}

/// Trains on `split` for `config.epochs` epochs of `ceil(n_s/B)` steps.
pub fn fit(split: &DomainSplit, config: &RunConfig) -> Result<FitOutcome> {
    config.validate()?;
    let source = split.source();
    let target = split.target();
    if source.len() < 2 {
        return Err(Error::InvalidInput(
            "source domain needs at least 2 records".into(),
        ));
    }
    if target.is_empty() {
        return Err(Error::InvalidInput("target domain is empty".into()));
    }
    let num_classes = source.num_classes();

    let standardizer = if config.standardize {
        Standardizer::fit(source)?
    } else {
        Standardizer::identity(source.dim())
    };
    let mut source = standardizer.transform(source);
    if config.use_ss_mix {
        source = augment::ss_mix(
            &source,
            &MixPolicy {
                beta_param: config.mix_beta_param,
                augment_factor: config.mix_factor,
                rng_seed: config.seed,
            },
        )?;
    }
    let target = standardizer.transform(target);
    let xs = source.feature_matrix();
    let ys = source.labels()?;
    let xt = target.feature_matrix();
    let yt = split.target_labels_for_evaluation();

    let mut state = TrainState::new(config, xs.ncols(), num_classes);
    let mut source_rng = rng::stream(config.seed, Stream::SourceShuffle);
    let mut kernel_rng = rng::stream(config.seed, Stream::KernelSample);
    let mut target_sampler =
        CyclingSampler::new(xt.nrows(), rng::stream(config.seed, Stream::TargetShuffle));
    let uses_target = config.use_mmd || config.use_cmmd || config.use_dscl_target;
    let target_batch = config.batch_size.min(xt.nrows());

    let mut logs = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..xs.nrows()).collect();
    for epoch in 0..config.epochs {
        let bank = if config.use_mmd || config.use_cmmd {
            Some(refresh_bank(&state.params, &xs, config, &mut kernel_rng)?)
        } else {
            None
        };
        let ctx = StepContext::for_epoch(epoch, config, bank);
        state.optimizer.learning_rate = config.learning_rate * config.lr_decay.powi(epoch as i32);
        rng::shuffle(&mut order, &mut source_rng);

        let mut steps = Vec::with_capacity(order.len().div_ceil(config.batch_size));
        for chunk in order.chunks(config.batch_size) {
            let bx = xs.select(Axis(0), chunk);
            let by: Vec<usize> = chunk.iter().map(|&i| ys[i]).collect();
            let tx = if uses_target {
                xt.select(Axis(0), &target_sampler.take(target_batch))
            } else {
                Array2::zeros((0, xt.ncols()))
            };
            steps.push(train_step(&mut state, bx.view(), &by, tx.view(), &ctx)?);
        }
        let (acc, _) = eval::evaluate_matrix(&state.params, xt.view(), yt, num_classes)?;
        logs.push(EpochLog::from_steps(&ctx, &steps, acc));
    }

    let (target_accuracy, confusion) =
        eval::evaluate_matrix(&state.params, xt.view(), yt, num_classes)?;
    Ok(FitOutcome {
        checkpoint: Checkpoint {
            params: state.params,
            dropout: config.dropout,
            standardizer: config.standardize.then_some(standardizer),
            velocity: Some(state.optimizer.velocity),
        },
        epochs: logs,
        steps: state.step,
        target_accuracy,
        confusion,
    })
}
