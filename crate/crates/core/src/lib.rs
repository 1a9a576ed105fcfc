//! Unsupervised domain adaptation for subject-shifted spectral features.
//!
//! The pipeline runs raw multichannel trials through band differential-entropy
//! extraction ([`features`]), intra-trial Mixup on the labeled source
//! ([`augment`]), and a small ReLU network ([`net`]) whose 64-d embedding is
//! aligned across domains with multi-kernel MMD and class-conditional MMD on
//! confidence-gated pseudo-labels ([`align`]) and regularized by pairwise
//! similarity consistency on both domains ([`dscl`]). [`trainer`] composes the
//! losses with their schedules and [`eval`] runs leave-one-subject-out
//! evaluation, ablations and mutual-information topography.

// `!(x > 0.0)` style checks are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod align;
pub mod augment;
pub mod cli;
pub mod datamodel;
pub mod dscl;
pub mod error;
pub mod eval;
pub mod features;
pub mod net;
pub mod rng;
pub mod trainer;

pub use datamodel::{DomainSplit, FeatureRecord, FeatureTable, RunConfig};
pub use error::{Error, Result};
