//! Per-block linear-logistic predictors.

use alloc::format;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::label_space::Partition;
use crate::math;
use crate::{Error, Result};

/// Probabilities are clamped to `[PROB_EPSILON, 1 - PROB_EPSILON]` so that
/// logs and KL terms stay finite.
pub const PROB_EPSILON: f64 = 1e-7;

/// One player: a weight row and bias per covered label.
///
/// Row k of `weights` and entry k of `bias` belong to label `label_block[k]`;
/// the block keeps the frequency-rank order assigned by the partition.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct PlayerModel {
    pub id: usize,
    pub label_block: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl PlayerModel {
    pub fn feature_dim(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    /// Checks internal shape consistency (used on checkpoint load).
    pub fn validate(&self, feature_dim: usize) -> Result<()> {
        if self.weights.len() != self.label_block.len() || self.bias.len() != self.label_block.len() {
            return Err(Error::ShapeMismatch(format!(
                "player {}: {} labels vs {} weight rows vs {} biases",
                self.id,
                self.label_block.len(),
                self.weights.len(),
                self.bias.len()
            )));
        }
        for (k, row) in self.weights.iter().enumerate() {
            if row.len() != feature_dim {
                return Err(Error::ShapeMismatch(format!(
                    "player {}, row {k}: {} weights, expected {feature_dim}",
                    self.id,
                    row.len()
                )));
            }
        }
        Ok(())
    }

    pub fn params_finite(&self) -> bool {
        self.bias.iter().all(|b| b.is_finite())
            && self.weights.iter().all(|row| row.iter().all(|w| w.is_finite()))
    }
}

/// Clamped sigmoid probabilities of one player for one sample, aligned with
/// the player's label block.
#[derive(Debug, Clone, PartialEq)]
pub struct PlayerOutput {
    pub player_id: usize,
    pub probs: Vec<f64>,
}

/// Draws every weight and bias i.i.d. from N(0, sigma^2).
///
/// The same (partition, feature_dim, sigma, seed) quadruple always produces
/// bit-identical parameters; sigma = 0 yields exact zeros.
pub fn init_players(
    partition: &Partition,
    feature_dim: usize,
    sigma: f64,
    seed: u64,
) -> Result<Vec<PlayerModel>> {
    if feature_dim == 0 {
        return Err(Error::InvalidParameter("feature_dim must be >= 1".into()));
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "init sigma must be finite and >= 0, got {sigma}"
        )));
    }
    let normal = Normal::new(0.0, sigma)
        .map_err(|_| Error::InvalidParameter(format!("bad init sigma {sigma}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let players = partition
        .blocks()
        .iter()
        .enumerate()
        .map(|(id, block)| {
            let weights = (0..block.len())
                .map(|_| (0..feature_dim).map(|_| normal.sample(&mut rng)).collect())
                .collect();
            let bias = (0..block.len()).map(|_| normal.sample(&mut rng)).collect();
            PlayerModel { id, label_block: block.clone(), weights, bias }
        })
        .collect();
    Ok(players)
}

/// Clamped per-label probabilities for one sample.
pub fn player_forward(player: &PlayerModel, features: &[f64]) -> Result<PlayerOutput> {
    let d = player.feature_dim();
    if features.len() != d {
        return Err(Error::ShapeMismatch(format!(
            "player {} expects {d} features, got {}",
            player.id,
            features.len()
        )));
    }
    let probs = player
        .weights
        .iter()
        .zip(&player.bias)
        .map(|(row, &b)| {
            let z: f64 = row.iter().zip(features).map(|(w, x)| w * x).sum::<f64>() + b;
            math::sigmoid(z).clamp(PROB_EPSILON, 1.0 - PROB_EPSILON)
        })
        .collect();
    Ok(PlayerOutput { player_id: player.id, probs })
}
