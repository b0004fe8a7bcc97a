//! Training-dynamics summaries: head/tail disagreement on a probe batch
//! and a digest of a finished diagnostics trace.

use alloc::vec::Vec;

use crate::label_space::{CoverIndex, HeadTailSplit, Partition};
use crate::math::bernoulli_kl;
use crate::player::PlayerOutput;
use crate::training::EpochDiagnostics;
use crate::{Error, Result};

/// Mean disagreement over a probe batch, split by label frequency side.
///
/// A side with no label covered by two or more players reports 0; the
/// shared-label counts tell vacuous zeros apart from genuine agreement.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SplitDisagreement {
    pub kl_head: f64,
    pub kl_tail: f64,
    pub head_shared_labels: usize,
    pub tail_shared_labels: usize,
}

/// Per sample, per shared label: average over the covering players of the
/// Bernoulli KL from the player's probability to its peers' mean; then
/// averaged over the side's shared labels and over samples.
pub fn disagreement_by_split(
    outputs: &[Vec<PlayerOutput>],
    partition: &Partition,
    split: &HeadTailSplit,
) -> Result<SplitDisagreement> {
    if outputs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let cover = CoverIndex::new(partition);
    let shared: Vec<usize> = (0..partition.num_labels())
        .filter(|&l| cover.covering(l).len() >= 2)
        .collect();
    let head_shared: Vec<usize> = shared.iter().copied().filter(|&l| !split.is_tail(l)).collect();
    let tail_shared: Vec<usize> = shared.iter().copied().filter(|&l| split.is_tail(l)).collect();

    let side_mean = |labels: &[usize]| -> Result<f64> {
        if labels.is_empty() {
            return Ok(0.0);
        }
        let mut sample_sum = 0.0;
        for sample in outputs {
            if sample.len() != partition.n_players() {
                return Err(Error::ShapeMismatch(alloc::format!(
                    "{} outputs for {} players",
                    sample.len(),
                    partition.n_players()
                )));
            }
            let mut label_sum = 0.0;
            for &l in labels {
                let entries = cover.covering(l);
                let total: f64 = entries.iter().map(|&(p, r)| sample[p].probs[r]).sum();
                let mut player_sum = 0.0;
                for &(p, r) in entries {
                    let own = sample[p].probs[r];
                    let peer_mean = (total - own) / (entries.len() - 1) as f64;
                    player_sum += bernoulli_kl(own, peer_mean);
                }
                label_sum += player_sum / entries.len() as f64;
            }
            sample_sum += label_sum / labels.len() as f64;
        }
        Ok(sample_sum / outputs.len() as f64)
    };

    Ok(SplitDisagreement {
        kl_head: side_mean(&head_shared)?,
        kl_tail: side_mean(&tail_shared)?,
        head_shared_labels: head_shared.len(),
        tail_shared_labels: tail_shared.len(),
    })
}

/// Epoch distance within which a maximal potential gain and a maximal
/// tail-disagreement decline count as aligned.
pub const ALIGNMENT_WINDOW: usize = 5;

/// Digest of a finished diagnostics trace.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TraceSummary {
    pub epochs: usize,
    /// Fraction of consecutive epoch pairs with non-decreasing phi.
    pub phi_monotone_fraction: f64,
    pub max_phi_gain: f64,
    /// Epoch at which phi gained the most over its predecessor.
    pub max_phi_gain_epoch: usize,
    pub first_kl_tail: f64,
    pub last_kl_tail: f64,
    /// Epoch with the steepest drop in kl_tail.
    pub max_kl_tail_decline_epoch: usize,
    /// Whether the two extreme epochs lie within [`ALIGNMENT_WINDOW`] of
    /// each other.
    pub gain_aligned_with_tail_decline: bool,
}

/// Summarizes a trace of at least two epochs.
pub fn trace_summary(diagnostics: &[EpochDiagnostics]) -> Result<TraceSummary> {
    if diagnostics.len() < 2 {
        return Err(Error::InvalidParameter(alloc::format!(
            "trace summary needs at least 2 epochs, got {}",
            diagnostics.len()
        )));
    }
    let mut non_decreasing = 0usize;
    let mut max_gain = f64::NEG_INFINITY;
    let mut max_gain_epoch = diagnostics[1].epoch;
    let mut max_decline = f64::NEG_INFINITY;
    let mut max_decline_epoch = diagnostics[1].epoch;
    for pair in diagnostics.windows(2) {
        let gain = pair[1].phi - pair[0].phi;
        if gain >= 0.0 {
            non_decreasing += 1;
        }
        if gain > max_gain {
            max_gain = gain;
            max_gain_epoch = pair[1].epoch;
        }
        let decline = pair[0].kl_tail - pair[1].kl_tail;
        if decline > max_decline {
            max_decline = decline;
            max_decline_epoch = pair[1].epoch;
        }
    }
    let pairs = diagnostics.len() - 1;
    Ok(TraceSummary {
        epochs: diagnostics.len(),
        phi_monotone_fraction: non_decreasing as f64 / pairs as f64,
        max_phi_gain: max_gain,
        max_phi_gain_epoch: max_gain_epoch,
        first_kl_tail: diagnostics[0].kl_tail,
        last_kl_tail: diagnostics[diagnostics.len() - 1].kl_tail,
        max_kl_tail_decline_epoch: max_decline_epoch,
        gain_aligned_with_tail_decline: max_gain_epoch.abs_diff(max_decline_epoch)
            <= ALIGNMENT_WINDOW,
    })
}
