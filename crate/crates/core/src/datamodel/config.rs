//! Run configuration and its flat `key = value` file format.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// Training hyperparameters, schedule endpoints and component switches.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Per-epoch learning-rate multiplier; 1 keeps it constant.
    pub lr_decay: f64,
    pub momentum: f64,
    pub dropout: f64,
    pub hidden_dims: (usize, usize),
    pub mix_beta_param: f64,
    /// Synthetic SS-Mix records per original source record.
    pub mix_factor: f64,
    pub kernel_count: usize,
    /// Max source rows used to refresh the kernel bandwidths each epoch.
    pub kernel_sample_size: usize,
    pub tau_start: f64,
    pub tau_end: f64,
    pub tau_pu_start: f64,
    pub tau_pu_end: f64,
    pub tau_pl_start: f64,
    pub tau_pl_end: f64,
    pub alpha_start: f64,
    pub alpha_end: f64,
    pub rho0: f64,
    pub rho1: f64,

    pub use_ss_mix: bool,
    pub use_mmd: bool,
    pub use_cmmd: bool,
    pub use_dscl_source: bool,
    pub use_dscl_target: bool,
    pub use_pseudo_confidence: bool,

    /// Z-score features with statistics fitted on the source domain.
    pub standardize: bool,
    /// Weight the target pairwise loss by lambda and the source one by beta.
    pub swap_lambda_beta_pt: bool,
    /// Average per-class CMMD terms instead of summing them.
    pub cmmd_class_mean: bool,
    /// Weight per-class CMMD terms by the source class prior.
    pub cmmd_prior_weighting: bool,
    /// Restrict target pair selection to pseudo-label-accepted samples.
    pub target_pairs_accepted_only: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            epochs: 200,
            batch_size: 32,
            learning_rate: 0.01,
            lr_decay: 1.0,
            momentum: 0.9,
            dropout: 0.25,
            hidden_dims: (64, 64),
            mix_beta_param: 0.5,
            mix_factor: 1.0,
            kernel_count: 5,
            kernel_sample_size: 512,
            tau_start: 0.80,
            tau_end: 0.95,
            tau_pu_start: 0.95,
            tau_pu_end: 0.80,
            tau_pl_start: 0.05,
            tau_pl_end: 0.20,
            alpha_start: 1.0,
            alpha_end: 0.1,
            rho0: 0.3,
            rho1: 0.6,
            use_ss_mix: true,
            use_mmd: true,
            use_cmmd: true,
            use_dscl_source: true,
            use_dscl_target: true,
            use_pseudo_confidence: true,
            standardize: true,
            swap_lambda_beta_pt: false,
            cmmd_class_mean: false,
            cmmd_prior_weighting: false,
            target_pairs_accepted_only: false,
        }
    }
}

/// Single-component removals of the ablation study, plus the two extremes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Ablation {
    Full,
    WithoutSsMix,
    WithoutMmd,
    WithoutCmmd,
    WithoutDsclSource,
    WithoutDsclTarget,
    WithoutPseudoConfidence,
    SourceOnly,
}

impl Ablation {
    /// The six single-component ablations followed by the full model.
    pub const STUDY: [Ablation; 7] = [
        Ablation::WithoutSsMix,
        Ablation::WithoutMmd,
        Ablation::WithoutCmmd,
        Ablation::WithoutDsclSource,
        Ablation::WithoutDsclTarget,
        Ablation::WithoutPseudoConfidence,
        Ablation::Full,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Ablation::Full => "sdc-net",
            Ablation::WithoutSsMix => "without-ss-mix",
            Ablation::WithoutMmd => "without-mmd",
            Ablation::WithoutCmmd => "without-cmmd",
            Ablation::WithoutDsclSource => "without-dscl-source",
            Ablation::WithoutDsclTarget => "without-dscl-target",
            Ablation::WithoutPseudoConfidence => "without-pseudo-confidence",
            Ablation::SourceOnly => "source-only",
        }
    }

    /// `base` with this ablation's switches applied on top.
    pub fn apply(self, base: &RunConfig) -> RunConfig {
        let mut c = base.clone();
        match self {
            Ablation::Full => {}
            Ablation::WithoutSsMix => c.use_ss_mix = false,
            Ablation::WithoutMmd => c.use_mmd = false,
            Ablation::WithoutCmmd => c.use_cmmd = false,
            Ablation::WithoutDsclSource => c.use_dscl_source = false,
            Ablation::WithoutDsclTarget => c.use_dscl_target = false,
            Ablation::WithoutPseudoConfidence => c.use_pseudo_confidence = false,
            Ablation::SourceOnly => {
                c.use_ss_mix = false;
                c.use_mmd = false;
                c.use_cmmd = false;
                c.use_dscl_source = false;
                c.use_dscl_target = false;
                c.use_pseudo_confidence = false;
            }
        }
        c
    }
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!(
            "{key}: expected a boolean, got {v:?}"
        ))),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse()
        .map_err(|e| Error::Config(format!("{key}: cannot parse {v:?}: {e}")))
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Parses `key = value` lines over the defaults. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = RunConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            c.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "seed" => self.seed = parse_num(key, v)?,
            "epochs" => self.epochs = parse_num(key, v)?,
            "batch_size" => self.batch_size = parse_num(key, v)?,
            "learning_rate" => self.learning_rate = parse_num(key, v)?,
            "lr_decay" => self.lr_decay = parse_num(key, v)?,
            "momentum" => self.momentum = parse_num(key, v)?,
            "dropout" => self.dropout = parse_num(key, v)?,
            "hidden_dims" => {
                let (a, b) = v
                    .split_once(',')
                    .ok_or_else(|| Error::Config(format!("hidden_dims: expected a,b got {v:?}")))?;
                self.hidden_dims = (parse_num(key, a.trim())?, parse_num(key, b.trim())?);
            }
            "mix_beta_param" => self.mix_beta_param = parse_num(key, v)?,
            "mix_factor" => self.mix_factor = parse_num(key, v)?,
            "kernel_count" => self.kernel_count = parse_num(key, v)?,
            "kernel_sample_size" => self.kernel_sample_size = parse_num(key, v)?,
            "tau_start" => self.tau_start = parse_num(key, v)?,
            "tau_end" => self.tau_end = parse_num(key, v)?,
            "tau_pu_start" => self.tau_pu_start = parse_num(key, v)?,
            "tau_pu_end" => self.tau_pu_end = parse_num(key, v)?,
            "tau_pl_start" => self.tau_pl_start = parse_num(key, v)?,
            "tau_pl_end" => self.tau_pl_end = parse_num(key, v)?,
            "alpha_start" => self.alpha_start = parse_num(key, v)?,
            "alpha_end" => self.alpha_end = parse_num(key, v)?,
            "rho0" => self.rho0 = parse_num(key, v)?,
            "rho1" => self.rho1 = parse_num(key, v)?,
            "use_ss_mix" => self.use_ss_mix = parse_bool(key, v)?,
            "use_mmd" => self.use_mmd = parse_bool(key, v)?,
            "use_cmmd" => self.use_cmmd = parse_bool(key, v)?,
            "use_dscl_source" => self.use_dscl_source = parse_bool(key, v)?,
            "use_dscl_target" => self.use_dscl_target = parse_bool(key, v)?,
            "use_pseudo_confidence" => self.use_pseudo_confidence = parse_bool(key, v)?,
            "standardize" => self.standardize = parse_bool(key, v)?,
            "swap_lambda_beta_pt" => self.swap_lambda_beta_pt = parse_bool(key, v)?,
            "cmmd_class_mean" => self.cmmd_class_mean = parse_bool(key, v)?,
            "cmmd_prior_weighting" => self.cmmd_prior_weighting = parse_bool(key, v)?,
            "target_pairs_accepted_only" => self.target_pairs_accepted_only = parse_bool(key, v)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.epochs < 1 {
            return fail("epochs must be >= 1".into());
        }
        if self.batch_size < 2 {
            return fail("batch_size must be >= 2".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            ));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return fail(format!("lr_decay must be in (0, 1], got {}", self.lr_decay));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return fail(format!("momentum must be in [0, 1), got {}", self.momentum));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail(format!("dropout must be in [0, 1), got {}", self.dropout));
        }
        if self.hidden_dims.0 == 0 || self.hidden_dims.1 == 0 {
            return fail("hidden_dims must be positive".into());
        }
        if !(self.mix_beta_param > 0.0) {
            return fail(format!(
                "mix_beta_param must be > 0, got {}",
                self.mix_beta_param
            ));
        }
        if !(self.mix_factor >= 0.0 && self.mix_factor.is_finite()) {
            return fail(format!("mix_factor must be >= 0, got {}", self.mix_factor));
        }
        if self.kernel_count == 0 {
            return fail("kernel_count must be >= 1".into());
        }
        if self.kernel_sample_size < 2 {
            return fail("kernel_sample_size must be >= 2".into());
        }
        for (name, v) in [("tau_start", self.tau_start), ("tau_end", self.tau_end)] {
            if !(0.0..=1.0).contains(&v) {
                return fail(format!("{name} must be in [0, 1], got {v}"));
            }
        }
        // Both thresholds are linear in the epoch, so checking the endpoints
        // covers every epoch in between.
        for (end, lo, hi) in [
            ("start", self.tau_pl_start, self.tau_pu_start),
            ("end", self.tau_pl_end, self.tau_pu_end),
        ] {
            if !(0.0 <= lo && lo < hi && hi <= 1.0) {
                return fail(format!(
                    "need 0 <= tau_pl_{end} < tau_pu_{end} <= 1, got {lo} and {hi}"
                ));
            }
        }
        if !(0.0 < self.rho0 && self.rho0 < self.rho1) {
            return fail(format!(
                "need 0 < rho0 < rho1, got {} and {}",
                self.rho0, self.rho1
            ));
        }
        if !(self.alpha_start >= 0.0 && self.alpha_end >= 0.0) {
            return fail("alpha endpoints must be >= 0".into());
        }
        Ok(())
    }

    /// Renders the configuration in the same format [`RunConfig::parse`] reads.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("seed", self.seed.to_string());
        kv("epochs", self.epochs.to_string());
        kv("batch_size", self.batch_size.to_string());
        kv("learning_rate", self.learning_rate.to_string());
        kv("lr_decay", self.lr_decay.to_string());
        kv("momentum", self.momentum.to_string());
        kv("dropout", self.dropout.to_string());
        kv(
            "hidden_dims",
            format!("{},{}", self.hidden_dims.0, self.hidden_dims.1),
        );
        kv("mix_beta_param", self.mix_beta_param.to_string());
        kv("mix_factor", self.mix_factor.to_string());
        kv("kernel_count", self.kernel_count.to_string());
        kv("kernel_sample_size", self.kernel_sample_size.to_string());
        kv("tau_start", self.tau_start.to_string());
        kv("tau_end", self.tau_end.to_string());
        kv("tau_pu_start", self.tau_pu_start.to_string());
        kv("tau_pu_end", self.tau_pu_end.to_string());
        kv("tau_pl_start", self.tau_pl_start.to_string());
        kv("tau_pl_end", self.tau_pl_end.to_string());
        kv("alpha_start", self.alpha_start.to_string());
        kv("alpha_end", self.alpha_end.to_string());
        kv("rho0", self.rho0.to_string());
        kv("rho1", self.rho1.to_string());
        kv("use_ss_mix", self.use_ss_mix.to_string());
        kv("use_mmd", self.use_mmd.to_string());
        kv("use_cmmd", self.use_cmmd.to_string());
        kv("use_dscl_source", self.use_dscl_source.to_string());
        kv("use_dscl_target", self.use_dscl_target.to_string());
        kv(
            "use_pseudo_confidence",
            self.use_pseudo_confidence.to_string(),
        );
        kv("standardize", self.standardize.to_string());
        kv("swap_lambda_beta_pt", self.swap_lambda_beta_pt.to_string());
        kv("cmmd_class_mean", self.cmmd_class_mean.to_string());
        kv(
            "cmmd_prior_weighting",
            self.cmmd_prior_weighting.to_string(),
        );
        kv(
            "target_pairs_accepted_only",
            self.target_pairs_accepted_only.to_string(),
        );
        s
    }

    /// True when no loss beyond source cross-entropy is active.
    pub fn is_source_only(&self) -> bool {
        !(self.use_mmd || self.use_cmmd || self.use_dscl_source || self.use_dscl_target)
    }
}
