//! Cooperative multi-predictor training for long-tail multi-label classification.
//!
//! A label space is split by empirical frequency into overlapping contiguous
//! blocks, one per player. Each player is a small linear-logistic model over
//! its block; their outputs are fused into a single per-label probability
//! vector. Training runs cyclic best-response sweeps: every player in turn
//! takes one gradient step on a shared payoff (a differentiable set-F1 or
//! negative-BCE surrogate) plus a curiosity term that pays for correctness on
//! rare labels and for informative disagreement with peers on shared labels.
//! The sum of payoff and curiosity acts as a potential for the sweep dynamics,
//! which the diagnostics track per epoch.
//!
//! Module layout mirrors the pipeline:
//!
//! - [`data`]: dataset container, synthetic long-tail generator, dataset
//!   splits, rare-positive downsampling.
//! - [`label_space`]: label frequencies, head/tail splits, the block partition.
//! - [`player`]: per-block linear-logistic predictors.
//! - [`fusion`]: combining player outputs and thresholding decisions.
//! - [`rewards`]: payoff surrogates, rarity/disagreement curiosity, the
//!   per-player objective and the potential.
//! - [`training`]: gradients, optimizers, the best-response training loop and
//!   ablation variants.
//! - [`metrics`]: micro/macro/rare F1, precision@k, mAP, specialization ranks.
//! - [`diagnostics`]: disagreement traces and training-dynamics summaries.
//!
//! The crate is `no_std`-compatible (with `alloc`); the default `std` feature
//! only switches float math from `libm` to the standard library. File formats,
//! configuration, and the experiment CLI live in the companion `tailgame`
//! crate.

#![cfg_attr(not(any(test, feature = "std")), no_std)]

extern crate alloc;

use alloc::string::String;
use core::fmt;

pub mod data;
pub mod diagnostics;
pub mod fusion;
pub mod label_space;
mod math;
pub mod metrics;
pub mod player;
pub mod rewards;
pub mod training;

pub use math::{bernoulli_kl, sigmoid};

/// Errors are values; no function here panics on bad input.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An operation that needs at least one sample got none.
    EmptyDataset,
    /// Partitioning asked for more players than there are labels.
    TooManyPlayers { players: usize, labels: usize },
    /// A label id at or beyond the label-space size.
    LabelOutOfRange { label: usize, num_labels: usize },
    /// Fusion weights for a label do not sum to one.
    UnnormalizedFusionWeights { label: usize, total: f64 },
    /// A parameter or intermediate value left the finite range during training.
    NumericalDivergence,
    /// A vector or matrix had the wrong length for the operation.
    ShapeMismatch(String),
    /// A configuration value outside its documented range.
    InvalidParameter(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::EmptyDataset => write!(f, "empty dataset"),
            Error::TooManyPlayers { players, labels } => {
                write!(f, "more players than labels ({players} > {labels})")
            }
            Error::LabelOutOfRange { label, num_labels } => {
                write!(f, "label id {label} outside [0, {num_labels})")
            }
            Error::UnnormalizedFusionWeights { label, total } => {
                write!(f, "unnormalized fusion weights (label {label} sums to {total})")
            }
            Error::NumericalDivergence => write!(f, "numerical divergence; reduce the step size"),
            Error::ShapeMismatch(msg) => write!(f, "shape mismatch: {msg}"),
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
