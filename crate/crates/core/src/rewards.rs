//! Payoff surrogates and curiosity rewards.
//!
//! The shared payoff M is a differentiable stand-in for set F1: either a
//! smoothed batch-level soft-F1 in [0, 1] or a negative mean binary
//! cross-entropy in (-inf, 0]. Each player i additionally earns a curiosity
//! term C_i = r_i + beta * d_i, where r_i pays for correctness on the
//! player's own labels weighted by rarity 1/(1 + freq), and d_i is the mean
//! Bernoulli KL between the player's probability and the average of its
//! peers on shared labels. The per-player objective is J_i = M + alpha * C_i
//! and the sweep potential is Phi = M + alpha * sum_i C_i.

use alloc::format;
use alloc::vec::Vec;

use crate::fusion::FusedPrediction;
use crate::label_space::{CoverIndex, FrequencyTable, Partition};
use crate::math;
use crate::{Error, Result};

/// Additive smoothing in the soft-F1 ratio.
pub const SOFT_F1_SMOOTHING: f64 = 1e-6;

/// How the rarity bonus scores a label: by the thresholded decision or by
/// the probability mass put on the true bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum CorrectnessMode {
    HardIndicator,
    SoftProbability,
}

impl Default for CorrectnessMode {
    fn default() -> Self {
        CorrectnessMode::SoftProbability
    }
}

#[cfg(feature = "serde")]
fn default_alpha() -> f64 {
    0.5
}

#[cfg(feature = "serde")]
fn default_beta() -> f64 {
    0.2
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct CuriositySpec {
    /// Weight of the whole curiosity term in the objective.
    #[cfg_attr(feature = "serde", serde(default = "default_alpha"))]
    pub alpha: f64,
    /// Weight of the disagreement part inside the curiosity term.
    #[cfg_attr(feature = "serde", serde(default = "default_beta"))]
    pub beta: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub correctness_mode: CorrectnessMode,
}

impl Default for CuriositySpec {
    fn default() -> Self {
        Self { alpha: 0.5, beta: 0.2, correctness_mode: CorrectnessMode::SoftProbability }
    }
}

impl CuriositySpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "curiosity alpha must be finite and >= 0, got {}",
                self.alpha
            )));
        }
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "curiosity beta must be finite and >= 0, got {}",
                self.beta
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SurrogateKind {
    SoftF1,
    NegBce,
}

/// Payoff surrogate choice, with optional per-label weights.
///
/// Weights scale each label's contribution inside the surrogate (the
/// single-predictor ablation uses rarity weights here); `None` means
/// every label counts equally.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct SurrogateSpec {
    pub kind: SurrogateKind,
    #[cfg_attr(feature = "serde", serde(default))]
    pub label_weights: Option<Vec<f64>>,
}

impl SurrogateSpec {
    pub fn new(kind: SurrogateKind) -> Self {
        Self { kind, label_weights: None }
    }

    /// Upper bound of the surrogate: 1 for soft-F1, 0 for negative BCE.
    pub fn m_max(&self) -> f64 {
        match self.kind {
            SurrogateKind::SoftF1 => 1.0,
            SurrogateKind::NegBce => 0.0,
        }
    }

    pub fn validate(&self, num_labels: usize) -> Result<()> {
        if let Some(w) = &self.label_weights {
            if w.len() != num_labels {
                return Err(Error::ShapeMismatch(format!(
                    "{} surrogate label weights for {num_labels} labels",
                    w.len()
                )));
            }
            if let Some(bad) = w.iter().find(|v| !v.is_finite() || **v < 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "surrogate label weights must be finite and >= 0, got {bad}"
                )));
            }
        }
        Ok(())
    }

    /// Effective weight of one label inside the surrogate.
    pub fn label_weight(&self, label: usize) -> f64 {
        self.label_weights.as_ref().map_or(1.0, |w| w[label])
    }
}

fn check_batch(probs: &[Vec<f64>], y: &[Vec<bool>]) -> Result<usize> {
    if probs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if probs.len() != y.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} probability rows vs {} label rows",
            probs.len(),
            y.len()
        )));
    }
    let num_labels = probs[0].len();
    for (m, (p, t)) in probs.iter().zip(y).enumerate() {
        if p.len() != num_labels || t.len() != num_labels {
            return Err(Error::ShapeMismatch(format!("row {m} has inconsistent width")));
        }
    }
    Ok(num_labels)
}

/// Batch payoff M for fused probabilities against true label rows.
///
/// soft-F1 pools the whole batch: (2 * sum p*y + s) / (sum p + sum y + s).
/// neg-BCE is the negated mean cross-entropy over all sample-label cells.
pub fn surrogate_score(
    probs: &[Vec<f64>],
    y: &[Vec<bool>],
    spec: &SurrogateSpec,
) -> Result<f64> {
    let num_labels = check_batch(probs, y)?;
    spec.validate(num_labels)?;
    let m = match spec.kind {
        SurrogateKind::SoftF1 => {
            let mut overlap = 0.0;
            let mut p_sum = 0.0;
            let mut y_sum = 0.0;
            for (p_row, y_row) in probs.iter().zip(y) {
                for (l, (&p, &t)) in p_row.iter().zip(y_row).enumerate() {
                    let w = spec.label_weight(l);
                    overlap += w * p * if t { 1.0 } else { 0.0 };
                    p_sum += w * p;
                    y_sum += w * if t { 1.0 } else { 0.0 };
                }
            }
            (2.0 * overlap + SOFT_F1_SMOOTHING) / (p_sum + y_sum + SOFT_F1_SMOOTHING)
        }
        SurrogateKind::NegBce => {
            let mut total = 0.0;
            for (p_row, y_row) in probs.iter().zip(y) {
                for (l, (&p, &t)) in p_row.iter().zip(y_row).enumerate() {
                    let p = p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0);
                    let cell = if t { math::ln(p) } else { math::ln(1.0 - p) };
                    total += spec.label_weight(l) * cell;
                }
            }
            total / (probs.len() * num_labels) as f64
        }
    };
    debug_assert!(m <= spec.m_max() + 1e-9, "surrogate {m} above its bound");
    Ok(m)
}

/// Rarity-weighted correctness of the fused prediction on one player's
/// block, for one sample.
pub fn rarity_bonus(
    block: &[usize],
    fused: &FusedPrediction,
    y: &[bool],
    table: &FrequencyTable,
    mode: CorrectnessMode,
) -> Result<f64> {
    let num_labels = table.num_labels();
    if fused.probs.len() != num_labels || fused.decisions.len() != num_labels || y.len() != num_labels
    {
        return Err(Error::ShapeMismatch(format!(
            "fused prediction/labels must cover all {num_labels} labels"
        )));
    }
    let mut bonus = 0.0;
    for &l in block {
        if l >= num_labels {
            return Err(Error::LabelOutOfRange { label: l, num_labels });
        }
        let w = 1.0 / (1.0 + table.freqs()[l]);
        bonus += match mode {
            CorrectnessMode::HardIndicator => {
                if fused.decisions[l] == y[l] {
                    w
                } else {
                    0.0
                }
            }
            CorrectnessMode::SoftProbability => {
                let q = if y[l] { fused.probs[l] } else { 1.0 - fused.probs[l] };
                w * q
            }
        };
    }
    Ok(bonus)
}

/// Mean Bernoulli KL from player `i` to the average of its peers over the
/// labels it shares, for one sample. Zero when the player shares nothing.
pub fn disagreement(
    i: usize,
    outputs: &[crate::player::PlayerOutput],
    partition: &Partition,
) -> Result<f64> {
    let cover = CoverIndex::new(partition);
    disagreement_indexed(i, outputs, partition, &cover)
}

/// `disagreement` with a prebuilt cover index (training hot path).
pub fn disagreement_indexed(
    i: usize,
    outputs: &[crate::player::PlayerOutput],
    partition: &Partition,
    cover: &CoverIndex,
) -> Result<f64> {
    if i >= partition.n_players() {
        return Err(Error::InvalidParameter(format!(
            "player index {i} out of range for {} players",
            partition.n_players()
        )));
    }
    if outputs.len() != partition.n_players() {
        return Err(Error::ShapeMismatch(format!(
            "{} outputs for {} players",
            outputs.len(),
            partition.n_players()
        )));
    }
    let shared = &partition.overlaps()[i];
    if shared.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for &l in shared {
        let mut own = None;
        let mut peer_sum = 0.0;
        let mut peers = 0usize;
        for &(player, row) in cover.covering(l) {
            let p = outputs[player].probs[row];
            if player == i {
                own = Some(p);
            } else {
                peer_sum += p;
                peers += 1;
            }
        }
        let own = own.ok_or_else(|| {
            Error::ShapeMismatch(format!("player {i} does not cover its own shared label {l}"))
        })?;
        total += math::bernoulli_kl(own, peer_sum / peers as f64);
    }
    Ok(total / shared.len() as f64)
}

/// C_i = r_i + beta * d_i.
pub fn curiosity(rarity: f64, disagreement: f64, spec: &CuriositySpec) -> f64 {
    rarity + spec.beta * disagreement
}

/// J_i = M + alpha * C_i.
pub fn per_player_objective(m: f64, curiosity: f64, alpha: f64) -> f64 {
    m + alpha * curiosity
}

/// Phi = M + alpha * sum_i C_i. Ascent in any single player's objective
/// moves this same scalar, which is what the training diagnostics track.
pub fn potential(m: f64, curiosities: &[f64], alpha: f64) -> f64 {
    m + alpha * curiosities.iter().sum::<f64>()
}

/// Differentiable stand-in for tail recall: expected true positives on tail
/// labels, weighted by coverage count over (1 + freq).
pub fn tail_recall_surrogate(
    probs: &[Vec<f64>],
    y: &[Vec<bool>],
    table: &FrequencyTable,
    tail: &[usize],
    partition: &Partition,
) -> Result<f64> {
    let num_labels = check_batch(probs, y)?;
    if num_labels != table.num_labels() {
        return Err(Error::ShapeMismatch(format!(
            "{num_labels} columns vs {} labels in the frequency table",
            table.num_labels()
        )));
    }
    let counts = partition.cover_counts();
    let mut total = 0.0;
    for &l in tail {
        if l >= num_labels {
            return Err(Error::LabelOutOfRange { label: l, num_labels });
        }
        let w = counts[l] as f64 / (1.0 + table.freqs()[l]);
        let tp_mass: f64 = probs
            .iter()
            .zip(y)
            .filter(|(_, y_row)| y_row[l])
            .map(|(p_row, _)| p_row[l])
            .sum();
        total += w * tp_mass;
    }
    Ok(total)
}

/// Per-player reward terms of one batch, as logged in the diagnostics.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RewardBreakdown {
    /// Mean rarity bonus.
    pub r: f64,
    /// Mean disagreement.
    pub d: f64,
    /// Mean curiosity C = r + beta * d.
    #[cfg_attr(feature = "serde", serde(rename = "C"))]
    pub c: f64,
    /// Objective J = M + alpha * C.
    #[cfg_attr(feature = "serde", serde(rename = "J"))]
    pub j: f64,
}
