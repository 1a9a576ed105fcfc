//! Command-line front end. Exit codes: 0 success, 1 invalid input or
//! configuration, 2 I/O failure.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::datamodel::{self, Ablation, RunConfig, SyntheticSpec};
use crate::error::{Error, Result};
use crate::eval;
use crate::features::{self, SpectralConfig, Taper};
use crate::net::Checkpoint;
use crate::trainer;

#[derive(Debug, Parser)]
#[command(
    name = "sdcnet",
    version,
    about = "Cross-subject domain adaptation for spectral EEG-style features"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TaperArg {
    Hann,
    Rectangular,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic covariate-shift feature table.
    Synth {
        /// Number of subjects.
        #[arg(long)]
        subjects: usize,
        /// Trials per subject.
        #[arg(long)]
        trials: usize,
        /// Windows per trial.
        #[arg(long)]
        windows: usize,
        /// Feature dimension.
        #[arg(long)]
        dim: usize,
        /// Number of classes.
        #[arg(long)]
        classes: usize,
        /// Per-subject shift strength (translation norm).
        #[arg(long)]
        shift: f64,
        /// Per-coordinate noise standard deviation.
        #[arg(long)]
        noise: f64,
        /// Random seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output feature CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract band differential-entropy features from raw trials.
    Extract {
        /// Raw trial CSV.
        #[arg(long)]
        raw: PathBuf,
        /// Output feature CSV.
        #[arg(long)]
        out: PathBuf,
        /// Window length in seconds.
        #[arg(long, default_value_t = 1.0)]
        window_sec: f64,
        /// Hop between windows in seconds (defaults to the window length).
        #[arg(long)]
        hop_sec: Option<f64>,
        /// Taper applied to each window.
        #[arg(long, value_enum, default_value_t = TaperArg::Hann)]
        taper: TaperArg,
    },
    /// Train one fold with the given subject as target.
    Train {
        /// Labeled feature CSV.
        #[arg(long)]
        data: PathBuf,
        /// Subject held out as the unlabeled target.
        #[arg(long)]
        target_subject: u32,
        /// Run configuration file (`key = value`); defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// JSON-lines per-epoch log output.
        #[arg(long)]
        log: PathBuf,
        /// Checkpoint output.
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Leave-one-subject-out evaluation.
    Loso {
        /// Labeled feature CSV.
        #[arg(long)]
        data: PathBuf,
        /// Run configuration file; defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// JSON report output.
        #[arg(long)]
        report: PathBuf,
        /// Folds trained in parallel.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Six single-component ablations plus the full model, each as a LOSO run.
    Ablate {
        /// Labeled feature CSV.
        #[arg(long)]
        data: PathBuf,
        /// Run configuration file; defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// JSON report output.
        #[arg(long)]
        report: PathBuf,
        /// Folds trained in parallel.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Mutual-information topography of a trained model's predictions.
    Mimap {
        /// Checkpoint from `train`.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Feature CSV to analyze.
        #[arg(long)]
        data: PathBuf,
        /// Channel count; bands = dim / channels.
        #[arg(long)]
        channels: usize,
        /// Output CSV (class,band,channel,value).
        #[arg(long)]
        out: PathBuf,
    },
    /// Export eval-mode embeddings for external projection tools.
    ExportEmb {
        /// Checkpoint from `train`.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Feature CSV.
        #[arg(long)]
        data: PathBuf,
        /// Output CSV.
        #[arg(long)]
        out: PathBuf,
    },
}

/// Writes via a sibling temporary file and a rename.
fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::Synth {
            subjects,
            trials,
            windows,
            dim,
            classes,
            shift,
            noise,
            seed,
            out,
        } => {
            let table = SyntheticSpec {
                num_subjects: subjects,
                trials_per_subject: trials,
                windows_per_trial: windows,
                dim,
                num_classes: classes,
                shift_strength: shift,
                noise_sigma: noise,
                seed,
            }
            .generate()?;
            datamodel::save_feature_table(&table, out)
        }
        Command::Extract {
            raw,
            out,
            window_sec,
            hop_sec,
            taper,
        } => {
            let trials = features::load_raw_trials(raw)?;
            let cfg = SpectralConfig {
                window_seconds: window_sec,
                hop_seconds: hop_sec.unwrap_or(window_sec),
                taper: match taper {
                    TaperArg::Hann => Taper::Hann,
                    TaperArg::Rectangular => Taper::Rectangular,
                },
                ..SpectralConfig::default()
            };
            let table = features::extract_de_features(&trials, &cfg)?;
            datamodel::save_feature_table(&table, out)
        }
        Command::Train {
            data,
            target_subject,
            config,
            log,
            checkpoint,
        } => {
            let cfg = load_config(config.as_deref())?;
            let table = datamodel::load_feature_table(data)?;
            let split = datamodel::split_for_subject(&table, target_subject)?;
            let out = trainer::fit(&split, &cfg)?;
            write_atomic(&log, &trainer::render_epoch_log(&out.epochs))?;
            write_atomic(&checkpoint, &out.checkpoint.to_text())
        }
        Command::Loso {
            data,
            config,
            report,
            jobs,
        } => {
            let cfg = load_config(config.as_deref())?;
            let table = datamodel::load_feature_table(data)?;
            let r = eval::loso_run(&table, &cfg, jobs)?;
            write_atomic(&report, &r.to_json())
        }
        Command::Ablate {
            data,
            config,
            report,
            jobs,
        } => {
            let cfg = load_config(config.as_deref())?;
            let table = datamodel::load_feature_table(data)?;
            let r = eval::ablation_study(&table, &cfg, &Ablation::STUDY, jobs)?;
            write_atomic(&report, &r.to_json())
        }
        Command::Mimap {
            checkpoint,
            data,
            channels,
            out,
        } => {
            let model = Checkpoint::load(checkpoint)?;
            let table = datamodel::load_feature_table(data)?;
            if channels == 0 || table.dim() % channels != 0 {
                return Err(Error::InvalidInput(format!(
                    "--channels {channels} does not divide feature dim {}",
                    table.dim()
                )));
            }
            let probs = model.forward_eval(table.feature_matrix().view())?.probs;
            let mi = eval::mi_topography(&table, probs.view(), table.dim() / channels, channels)?;
            write_atomic(&out, &mi.to_csv())
        }
        Command::ExportEmb {
            checkpoint,
            data,
            out,
        } => {
            let model = Checkpoint::load(checkpoint)?;
            let table = datamodel::load_feature_table(data)?;
            write_atomic(&out, &eval::render_embeddings(&model, &table)?)
        }
    }
}

/// Parses `argv` (including the program name), runs it and returns the exit
/// code. Messages go to stdout for help and stderr for errors.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_io() {
                2
            } else {
                1
            }
        }
    }
}
