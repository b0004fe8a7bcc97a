//! Combining player outputs into one probability vector per sample.
//!
//! Two strategies: a per-label convex combination of the covering players
//! (weights must sum to one per label) and max-pooling, which takes the most
//! confident covering player. Decisions use a strict `p > tau` rule with
//! either one global threshold or a per-label vector; a midpoint scan over
//! validation scores can tune the per-label vector.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::label_space::Partition;
use crate::player::PlayerOutput;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum FusionStrategy {
    WeightedAverage,
    MaxPool,
}

/// Per-(player, label) fusion weights for the weighted-average strategy.
///
/// `Explicit` carries one weight per block row, aligned with each player's
/// `label_block`. Max-pooling ignores weights entirely.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum FusionWeights {
    /// `1 / cover_count(label)` for every covering player.
    Uniform,
    Explicit(Vec<Vec<f64>>),
}

/// Decision thresholds, strict (`predict 1 iff p > tau`).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(untagged))]
pub enum Thresholds {
    Global(f64),
    PerLabel(Vec<f64>),
}

impl Thresholds {
    pub fn validate(&self, num_labels: usize) -> Result<()> {
        match self {
            Thresholds::Global(t) => {
                if !(*t > 0.0 && *t < 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "threshold must be in (0, 1), got {t}"
                    )));
                }
            }
            Thresholds::PerLabel(taus) => {
                if taus.len() != num_labels {
                    return Err(Error::ShapeMismatch(format!(
                        "{} thresholds for {num_labels} labels",
                        taus.len()
                    )));
                }
                for (l, t) in taus.iter().enumerate() {
                    if !(*t > 0.0 && *t < 1.0) {
                        return Err(Error::InvalidParameter(format!(
                            "threshold for label {l} must be in (0, 1), got {t}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn for_label(&self, label: usize) -> f64 {
        match self {
            Thresholds::Global(t) => *t,
            Thresholds::PerLabel(taus) => taus[label],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct FusionSpec {
    #[cfg_attr(feature = "serde", serde(default))]
    pub strategy: FusionStrategy,
    #[cfg_attr(feature = "serde", serde(default))]
    pub weights: FusionWeights,
    #[cfg_attr(feature = "serde", serde(default))]
    pub thresholds: Thresholds,
}

impl Default for FusionStrategy {
    fn default() -> Self {
        FusionStrategy::WeightedAverage
    }
}

impl Default for FusionWeights {
    fn default() -> Self {
        FusionWeights::Uniform
    }
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds::Global(0.5)
    }
}

impl Default for FusionSpec {
    fn default() -> Self {
        Self {
            strategy: FusionStrategy::default(),
            weights: FusionWeights::default(),
            thresholds: Thresholds::default(),
        }
    }
}

/// Fused probabilities and thresholded decisions for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedPrediction {
    pub probs: Vec<f64>,
    pub decisions: Vec<bool>,
}

/// A fusion spec resolved against a partition: per label, the covering
/// players with their block rows and normalized weights. Validates once,
/// then fuses samples cheaply.
#[derive(Debug, Clone)]
pub struct FusionContext {
    strategy: FusionStrategy,
    thresholds: Thresholds,
    block_lens: Vec<usize>,
    /// Per label: (player, row_in_block, weight).
    entries: Vec<Vec<(usize, usize, f64)>>,
}

impl FusionContext {
    pub fn new(partition: &Partition, spec: &FusionSpec) -> Result<Self> {
        let num_labels = partition.num_labels();
        spec.thresholds.validate(num_labels)?;
        if let FusionWeights::Explicit(per_player) = &spec.weights {
            if per_player.len() != partition.n_players() {
                return Err(Error::ShapeMismatch(format!(
                    "explicit weights for {} players, partition has {}",
                    per_player.len(),
                    partition.n_players()
                )));
            }
            for (i, (ws, block)) in per_player.iter().zip(partition.blocks()).enumerate() {
                if ws.len() != block.len() {
                    return Err(Error::ShapeMismatch(format!(
                        "player {i}: {} weights for a block of {}",
                        ws.len(),
                        block.len()
                    )));
                }
                if let Some(w) = ws.iter().find(|w| !w.is_finite() || **w < 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "player {i} has a negative or non-finite fusion weight {w}"
                    )));
                }
            }
        }

        let mut entries: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); num_labels];
        for (player, block) in partition.blocks().iter().enumerate() {
            for (row, &l) in block.iter().enumerate() {
                entries[l].push((player, row, 0.0));
            }
        }
        match (&spec.strategy, &spec.weights) {
            (FusionStrategy::MaxPool, _) => {}
            (FusionStrategy::WeightedAverage, FusionWeights::Uniform) => {
                for lst in entries.iter_mut() {
                    let w = 1.0 / lst.len() as f64;
                    for e in lst.iter_mut() {
                        e.2 = w;
                    }
                }
            }
            (FusionStrategy::WeightedAverage, FusionWeights::Explicit(per_player)) => {
                for (l, lst) in entries.iter_mut().enumerate() {
                    let mut total = 0.0;
                    for e in lst.iter_mut() {
                        e.2 = per_player[e.0][e.1];
                        total += e.2;
                    }
                    if (total - 1.0).abs() > 1e-9 {
                        return Err(Error::UnnormalizedFusionWeights { label: l, total });
                    }
                }
            }
        }
        Ok(Self {
            strategy: spec.strategy,
            thresholds: spec.thresholds.clone(),
            block_lens: partition.blocks().iter().map(Vec::len).collect(),
            entries,
        })
    }

    pub fn num_labels(&self) -> usize {
        self.entries.len()
    }

    pub fn strategy(&self) -> FusionStrategy {
        self.strategy
    }

    pub fn thresholds(&self) -> &Thresholds {
        &self.thresholds
    }

    /// Covering entries `(player, row, weight)` for one label.
    pub fn entries_for(&self, label: usize) -> &[(usize, usize, f64)] {
        &self.entries[label]
    }

    fn check_outputs(&self, outputs: &[PlayerOutput]) -> Result<()> {
        if outputs.len() != self.block_lens.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} player outputs for {} players",
                outputs.len(),
                self.block_lens.len()
            )));
        }
        for (i, (out, &len)) in outputs.iter().zip(&self.block_lens).enumerate() {
            if out.probs.len() != len {
                return Err(Error::ShapeMismatch(format!(
                    "player {i} emitted {} probabilities for a block of {len}",
                    out.probs.len()
                )));
            }
        }
        Ok(())
    }

    /// Fused per-label probabilities for one sample.
    pub fn fuse(&self, outputs: &[PlayerOutput]) -> Result<Vec<f64>> {
        self.check_outputs(outputs)?;
        let probs = self
            .entries
            .iter()
            .map(|lst| match self.strategy {
                FusionStrategy::WeightedAverage => {
                    lst.iter().map(|&(p, r, w)| w * outputs[p].probs[r]).sum()
                }
                FusionStrategy::MaxPool => lst
                    .iter()
                    .map(|&(p, r, _)| outputs[p].probs[r])
                    .fold(f64::NEG_INFINITY, f64::max),
            })
            .collect();
        Ok(probs)
    }

    /// For max-pooling: which covering player owns each label's fused value
    /// (ties go to the lower player id). Needed by the gradient.
    pub fn argmax_players(&self, outputs: &[PlayerOutput]) -> Result<Vec<usize>> {
        self.check_outputs(outputs)?;
        Ok(self
            .entries
            .iter()
            .map(|lst| {
                let mut best = lst[0].0;
                let mut best_p = outputs[lst[0].0].probs[lst[0].1];
                for &(p, r, _) in &lst[1..] {
                    let v = outputs[p].probs[r];
                    if v > best_p {
                        best_p = v;
                        best = p;
                    }
                }
                best
            })
            .collect())
    }

    pub fn fuse_and_threshold(&self, outputs: &[PlayerOutput]) -> Result<FusedPrediction> {
        let probs = self.fuse(outputs)?;
        let decisions = threshold(&probs, &self.thresholds)?;
        Ok(FusedPrediction { probs, decisions })
    }
}

/// One-shot fusion of a single sample's outputs.
pub fn fuse(
    outputs: &[PlayerOutput],
    partition: &Partition,
    spec: &FusionSpec,
) -> Result<Vec<f64>> {
    FusionContext::new(partition, spec)?.fuse(outputs)
}

/// Strict thresholding: predict 1 iff `p > tau`.
pub fn threshold(probs: &[f64], thresholds: &Thresholds) -> Result<Vec<bool>> {
    thresholds.validate(probs.len())?;
    Ok(probs
        .iter()
        .enumerate()
        .map(|(l, &p)| p > thresholds.for_label(l))
        .collect())
}

/// Per-label thresholds maximizing validation F1.
///
/// Candidates are midpoints of consecutive distinct sorted scores; the best
/// candidate wins, ties going to the smallest threshold. Labels with no
/// positive validation sample (or a single distinct score) keep
/// `default_tau`.
pub fn tune_thresholds(
    scores: &[Vec<f64>],
    labels: &[Vec<bool>],
    default_tau: f64,
) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if scores.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} score rows vs {} label rows",
            scores.len(),
            labels.len()
        )));
    }
    let num_labels = scores[0].len();
    for (m, (s, y)) in scores.iter().zip(labels).enumerate() {
        if s.len() != num_labels || y.len() != num_labels {
            return Err(Error::ShapeMismatch(format!("row {m} has inconsistent width")));
        }
    }
    if !(default_tau > 0.0 && default_tau < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "default threshold must be in (0, 1), got {default_tau}"
        )));
    }

    let mut taus = Vec::with_capacity(num_labels);
    for l in 0..num_labels {
        let positives = labels.iter().filter(|y| y[l]).count();
        if positives == 0 {
            taus.push(default_tau);
            continue;
        }
        let mut sorted: Vec<f64> = scores.iter().map(|s| s[l]).collect();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        sorted.dedup();
        if sorted.len() < 2 {
            taus.push(default_tau);
            continue;
        }
        let mut best_tau = f64::NAN;
        let mut best_f1 = f64::NEG_INFINITY;
        for pair in sorted.windows(2) {
            let tau = 0.5 * (pair[0] + pair[1]);
            let mut tp = 0usize;
            let mut fp = 0usize;
            let mut fna = 0usize;
            for (s, y) in scores.iter().zip(labels) {
                let pred = s[l] > tau;
                match (pred, y[l]) {
                    (true, true) => tp += 1,
                    (true, false) => fp += 1,
                    (false, true) => fna += 1,
                    (false, false) => {}
                }
            }
            let denom = 2 * tp + fp + fna;
            let f1 = if denom == 0 { 0.0 } else { 2.0 * tp as f64 / denom as f64 };
            if f1 > best_f1 {
                best_f1 = f1;
                best_tau = tau;
            }
        }
        taus.push(best_tau);
    }
    Ok(taus)
}
