//! Cyclic best-response training.
//!
//! Each minibatch sweeps the players in ascending id order; every player
//! computes the analytic ascent gradient of its own objective
//! J_i = M + alpha * C_i against the current peer parameters (peers with a
//! lower id are already updated within the sweep) and takes one optimizer
//! step. Epoch-end diagnostics track the potential Phi, per-player reward
//! terms, head/tail disagreement on a probe batch, and validation metrics.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::MultiLabelDataset;
use crate::diagnostics::disagreement_by_split;
use crate::fusion::{
    threshold, tune_thresholds, FusedPrediction, FusionContext, FusionSpec, FusionStrategy,
    Thresholds,
};
use crate::label_space::{
    compute_frequencies, partition_labels, split_head_tail, CoverIndex, FrequencyTable,
    Partition, SplitRule,
};
use crate::math;
use crate::metrics::{metric_report, MetricReport, MetricSummary};
use crate::player::{init_players, player_forward, PlayerModel, PlayerOutput, PROB_EPSILON};
use crate::rewards::{
    disagreement_indexed, potential, rarity_bonus, surrogate_score, CorrectnessMode,
    CuriositySpec, RewardBreakdown, SurrogateKind, SurrogateSpec, SOFT_F1_SMOOTHING,
};
use crate::{Error, Result};

const INIT_STREAM: u64 = 1;
const SHUFFLE_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Optimizer {
    Sgd,
    AdaptiveMoments { beta1: f64, beta2: f64, epsilon: f64 },
}

impl Optimizer {
    /// First/second-moment ascent with the usual constants.
    pub fn adaptive_moments() -> Self {
        Optimizer::AdaptiveMoments { beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }

    pub fn validate(&self) -> Result<()> {
        if let Optimizer::AdaptiveMoments { beta1, beta2, epsilon } = *self {
            for (name, b) in [("beta1", beta1), ("beta2", beta2)] {
                if !(b >= 0.0 && b < 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "{name} must be in [0, 1), got {b}"
                    )));
                }
            }
            if !(epsilon > 0.0) || !epsilon.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "epsilon must be finite and > 0, got {epsilon}"
                )));
            }
        }
        Ok(())
    }
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::adaptive_moments()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum PatienceMetric {
    RareF1,
    MicroF1,
    Map,
}

impl PatienceMetric {
    fn value(&self, summary: &MetricSummary) -> f64 {
        match self {
            PatienceMetric::RareF1 => summary.rare_f1,
            PatienceMetric::MicroF1 => summary.micro_f1,
            PatienceMetric::Map => summary.map,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum StoppingRule {
    /// Run every configured epoch.
    FixedEpochs,
    /// Stop once the validation metric has not improved for `patience`
    /// consecutive epochs; the best-epoch parameters are returned.
    Patience { patience: usize, metric: PatienceMetric },
}

impl Default for StoppingRule {
    fn default() -> Self {
        StoppingRule::FixedEpochs
    }
}

/// What the per-epoch validation pass reports.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct MetricOptions {
    /// Cutoffs for precision@k; each must be within the label count.
    pub ks: Vec<usize>,
    /// How the rare-label pool for Rare-F1 is cut.
    pub rare_split: SplitRule,
}

impl Default for MetricOptions {
    fn default() -> Self {
        Self { ks: vec![1, 3, 5], rare_split: SplitRule::CountFraction(0.2) }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct TrainConfig {
    pub n_players: usize,
    /// Overlap ratio between adjacent label blocks.
    pub rho: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Shared step size; `player_learning_rates` overrides it per player.
    pub learning_rate: f64,
    pub player_learning_rates: Option<Vec<f64>>,
    pub optimizer: Optimizer,
    pub curiosity: CuriositySpec,
    pub surrogate: SurrogateSpec,
    pub fusion: FusionSpec,
    /// Standard deviation of the parameter initialization.
    pub init_sigma: f64,
    pub seed: u64,
    pub stopping: StoppingRule,
    pub metrics: MetricOptions,
    /// Head/tail cut used for the disagreement trace (`kl_head`/`kl_tail`).
    pub dynamics_split: SplitRule,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_players: 3,
            rho: 0.2,
            epochs: 40,
            batch_size: 64,
            learning_rate: 0.05,
            player_learning_rates: None,
            optimizer: Optimizer::default(),
            curiosity: CuriositySpec::default(),
            surrogate: SurrogateSpec::new(SurrogateKind::SoftF1),
            fusion: FusionSpec::default(),
            init_sigma: 0.5,
            seed: 0,
            stopping: StoppingRule::FixedEpochs,
            metrics: MetricOptions::default(),
            dynamics_split: SplitRule::CumulativeMass(0.1),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, num_labels: usize) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidParameter("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter("batch_size must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "learning_rate must be finite and > 0, got {}",
                self.learning_rate
            )));
        }
        if let Some(etas) = &self.player_learning_rates {
            if etas.len() != self.n_players {
                return Err(Error::ShapeMismatch(format!(
                    "{} per-player learning rates for {} players",
                    etas.len(),
                    self.n_players
                )));
            }
            if let Some(eta) = etas.iter().find(|e| !(**e > 0.0) || !e.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "per-player learning rates must be finite and > 0, got {eta}"
                )));
            }
        }
        if !(self.init_sigma >= 0.0) || !self.init_sigma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "init_sigma must be finite and >= 0, got {}",
                self.init_sigma
            )));
        }
        self.optimizer.validate()?;
        self.curiosity.validate()?;
        self.surrogate.validate(num_labels)?;
        if let StoppingRule::Patience { patience, .. } = self.stopping {
            if patience == 0 {
                return Err(Error::InvalidParameter("patience must be >= 1".into()));
            }
        }
        for &k in &self.metrics.ks {
            if k == 0 || k > num_labels {
                return Err(Error::InvalidParameter(format!(
                    "precision@k cutoff {k} outside [1, {num_labels}]"
                )));
            }
        }
        Ok(())
    }

    fn eta(&self, player: usize) -> f64 {
        self.player_learning_rates
            .as_ref()
            .map_or(self.learning_rate, |etas| etas[player])
    }
}

/// Ascent gradient with the same shape as the player's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PlayerGradient {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl PlayerGradient {
    pub fn zeros(rows: usize, feature_dim: usize) -> Self {
        Self { weights: vec![vec![0.0; feature_dim]; rows], bias: vec![0.0; rows] }
    }

    pub fn max_abs(&self) -> f64 {
        let w = self.weights.iter().flatten().fold(0.0f64, |a, g| a.max(g.abs()));
        self.bias.iter().fold(w, |a, g| a.max(g.abs()))
    }
}

/// Per-player first/second moment buffers for the adaptive optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentState {
    m_weights: Vec<Vec<f64>>,
    v_weights: Vec<Vec<f64>>,
    m_bias: Vec<f64>,
    v_bias: Vec<f64>,
    step: u64,
}

impl MomentState {
    pub fn new(player: &PlayerModel) -> Self {
        let rows = player.label_block.len();
        let d = player.feature_dim();
        Self {
            m_weights: vec![vec![0.0; d]; rows],
            v_weights: vec![vec![0.0; d]; rows],
            m_bias: vec![0.0; rows],
            v_bias: vec![0.0; rows],
            step: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    players: Vec<MomentState>,
}

impl OptimizerState {
    pub fn new(players: &[PlayerModel]) -> Self {
        Self { players: players.iter().map(MomentState::new).collect() }
    }

    pub fn player_mut(&mut self, i: usize) -> &mut MomentState {
        &mut self.players[i]
    }
}

/// One ascent step on a player's parameters.
pub fn apply_update(
    player: &mut PlayerModel,
    grad: &PlayerGradient,
    eta: f64,
    optimizer: &Optimizer,
    state: &mut MomentState,
) -> Result<()> {
    let rows = player.label_block.len();
    let d = player.feature_dim();
    if grad.weights.len() != rows
        || grad.bias.len() != rows
        || grad.weights.iter().any(|r| r.len() != d)
    {
        return Err(Error::ShapeMismatch(format!(
            "gradient shape does not match player {}'s {rows}x{d} parameters",
            player.id
        )));
    }
    match *optimizer {
        Optimizer::Sgd => {
            for (w_row, g_row) in player.weights.iter_mut().zip(&grad.weights) {
                for (w, g) in w_row.iter_mut().zip(g_row) {
                    *w += eta * g;
                }
            }
            for (b, g) in player.bias.iter_mut().zip(&grad.bias) {
                *b += eta * g;
            }
        }
        Optimizer::AdaptiveMoments { beta1, beta2, epsilon } => {
            state.step += 1;
            let bc1 = 1.0 - math::powf(beta1, state.step as f64);
            let bc2 = 1.0 - math::powf(beta2, state.step as f64);
            let adam = |theta: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *theta += eta * m_hat / (math::sqrt(v_hat) + epsilon);
            };
            for r in 0..rows {
                for k in 0..d {
                    adam(
                        &mut player.weights[r][k],
                        &mut state.m_weights[r][k],
                        &mut state.v_weights[r][k],
                        grad.weights[r][k],
                    );
                }
                adam(&mut player.bias[r], &mut state.m_bias[r], &mut state.v_bias[r], grad.bias[r]);
            }
        }
    }
    Ok(())
}

/// Per-sample outputs of every player, outer index = sample.
fn forward_batch(players: &[PlayerModel], features: &[Vec<f64>]) -> Result<Vec<Vec<PlayerOutput>>> {
    features
        .iter()
        .map(|x| players.iter().map(|p| player_forward(p, x)).collect())
        .collect()
}

fn check_gradient_inputs(
    i: usize,
    players: &[PlayerModel],
    features: &[Vec<f64>],
    y: &[Vec<bool>],
    num_labels: usize,
) -> Result<()> {
    if features.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if i >= players.len() {
        return Err(Error::InvalidParameter(format!(
            "player index {i} out of range for {} players",
            players.len()
        )));
    }
    if features.len() != y.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} feature rows vs {} label rows",
            features.len(),
            y.len()
        )));
    }
    if let Some(bad) = y.iter().position(|row| row.len() != num_labels) {
        return Err(Error::ShapeMismatch(format!(
            "label row {bad} has {} entries for {num_labels} labels",
            y[bad].len()
        )));
    }
    Ok(())
}

/// Analytic ascent gradient of player `i`'s batch objective
/// J_i = M + alpha * mean(r_i + beta * d_i), peers held fixed.
///
/// M and the rarity bonus are differentiated through the fusion operator;
/// the disagreement term only through the player's own probability (the
/// peer mean contains no parameter of player `i`). Clamped probabilities
/// and non-winning max-pool entries contribute zero.
#[allow(clippy::too_many_arguments)]
pub fn player_gradient(
    i: usize,
    players: &[PlayerModel],
    features: &[Vec<f64>],
    y: &[Vec<bool>],
    partition: &Partition,
    ctx: &FusionContext,
    table: &FrequencyTable,
    curiosity: &CuriositySpec,
    surrogate: &SurrogateSpec,
) -> Result<PlayerGradient> {
    let l_total = ctx.num_labels();
    check_gradient_inputs(i, players, features, y, l_total)?;
    surrogate.validate(l_total)?;

    let b = features.len();
    let outs = forward_batch(players, features)?;
    let fused: Vec<Vec<f64>> = outs.iter().map(|o| ctx.fuse(o)).collect::<Result<_>>()?;
    let winners: Option<Vec<Vec<usize>>> = match ctx.strategy() {
        FusionStrategy::MaxPool => {
            Some(outs.iter().map(|o| ctx.argmax_players(o)).collect::<Result<_>>()?)
        }
        FusionStrategy::WeightedAverage => None,
    };

    // Pooled sums of the soft-F1 ratio, shared by every cell's derivative.
    let (a_sum, d_sum) = match surrogate.kind {
        SurrogateKind::SoftF1 => {
            let mut a = 0.0;
            let mut d = 0.0;
            for (q_row, y_row) in fused.iter().zip(y) {
                for (l, (&q, &t)) in q_row.iter().zip(y_row).enumerate() {
                    let w = surrogate.label_weight(l);
                    if t {
                        a += w * q;
                        d += w;
                    }
                    d += w * q;
                }
            }
            (a, d)
        }
        SurrogateKind::NegBce => (0.0, 0.0),
    };

    let player = &players[i];
    let block = &partition.blocks()[i];
    let shared = &partition.overlaps()[i];
    // Overlap lists follow frequency-rank order, not label-id order, so
    // membership needs a mask rather than a binary search.
    let mut is_shared = vec![false; l_total];
    for &l in shared {
        is_shared[l] = true;
    }
    let feature_dim = player.feature_dim();
    let alpha = curiosity.alpha;
    let beta = curiosity.beta;
    let soft_rarity = curiosity.correctness_mode == CorrectnessMode::SoftProbability;
    let bce_scale = 1.0 / (b * l_total) as f64;

    let mut grad = PlayerGradient::zeros(block.len(), feature_dim);
    for (m, x) in features.iter().enumerate() {
        for (r, &l) in block.iter().enumerate() {
            let p = outs[m][i].probs[r];
            let dpi = if p <= PROB_EPSILON || p >= 1.0 - PROB_EPSILON {
                0.0
            } else {
                p * (1.0 - p)
            };
            if dpi == 0.0 {
                continue;
            }
            let truth = y[m][l];
            let fusion_path = match &winners {
                Some(w) => {
                    if w[m][l] == i {
                        1.0
                    } else {
                        0.0
                    }
                }
                None => ctx
                    .entries_for(l)
                    .iter()
                    .find(|&&(p_id, _, _)| p_id == i)
                    .map(|&(_, _, w)| w)
                    .unwrap_or(0.0),
            };

            let mut g = 0.0;
            if fusion_path != 0.0 {
                let w = surrogate.label_weight(l);
                let dm_dq = match surrogate.kind {
                    SurrogateKind::SoftF1 => {
                        let denom = d_sum + SOFT_F1_SMOOTHING;
                        let y_val = if truth { 1.0 } else { 0.0 };
                        (2.0 * w * y_val * denom - (2.0 * a_sum + SOFT_F1_SMOOTHING) * w)
                            / (denom * denom)
                    }
                    SurrogateKind::NegBce => {
                        let q = fused[m][l];
                        bce_scale * if truth { w / q } else { -w / (1.0 - q) }
                    }
                };
                g += dm_dq * fusion_path;
                if alpha > 0.0 && soft_rarity {
                    let rarity = 1.0 / (1.0 + table.freqs()[l]);
                    let sign = if truth { 1.0 } else { -1.0 };
                    g += alpha / b as f64 * sign * rarity * fusion_path;
                }
            }
            if alpha > 0.0 && beta > 0.0 && is_shared[l] {
                let mut peer_sum = 0.0;
                let mut peers = 0usize;
                for &(p_id, row, _) in ctx.entries_for(l) {
                    if p_id != i {
                        peer_sum += outs[m][p_id].probs[row];
                        peers += 1;
                    }
                }
                let peer_mean = peer_sum / peers as f64;
                let dkl = math::ln((p * (1.0 - peer_mean)) / ((1.0 - p) * peer_mean));
                g += alpha * beta / (b * shared.len()) as f64 * dkl;
            }
            if g != 0.0 {
                let cell = g * dpi;
                for (gw, xv) in grad.weights[r].iter_mut().zip(x) {
                    *gw += cell * xv;
                }
                grad.bias[r] += cell;
            }
        }
    }
    Ok(grad)
}

/// Batch objective J_i of one player under the current parameters; the
/// quantity whose gradient `player_gradient` returns.
#[allow(clippy::too_many_arguments)]
pub fn player_batch_objective(
    i: usize,
    players: &[PlayerModel],
    features: &[Vec<f64>],
    y: &[Vec<bool>],
    partition: &Partition,
    ctx: &FusionContext,
    table: &FrequencyTable,
    curiosity: &CuriositySpec,
    surrogate: &SurrogateSpec,
) -> Result<f64> {
    check_gradient_inputs(i, players, features, y, ctx.num_labels())?;
    let outs = forward_batch(players, features)?;
    let fused: Vec<FusedPrediction> =
        outs.iter().map(|o| ctx.fuse_and_threshold(o)).collect::<Result<_>>()?;
    let fused_rows: Vec<Vec<f64>> = fused.iter().map(|f| f.probs.clone()).collect();
    let payoff = surrogate_score(&fused_rows, y, surrogate)?;
    let cover = CoverIndex::new(partition);
    let block = &partition.blocks()[i];
    let mut c_sum = 0.0;
    for (m, f) in fused.iter().enumerate() {
        let r = rarity_bonus(block, f, &y[m], table, curiosity.correctness_mode)?;
        let d = disagreement_indexed(i, &outs[m], partition, &cover)?;
        c_sum += r + curiosity.beta * d;
    }
    Ok(payoff + curiosity.alpha * c_sum / features.len() as f64)
}

/// One diagnostics record per epoch, serialized as a JSON line by the
/// training command.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpochDiagnostics {
    pub epoch: usize,
    pub phi: f64,
    /// Phi minus the previous epoch's phi (epoch 1: minus the value at
    /// initialization).
    pub phi_delta: f64,
    pub per_player: Vec<RewardBreakdown>,
    pub kl_head: f64,
    pub kl_tail: f64,
    /// Shared-label counts behind the KL means; 0 marks a vacuous split.
    pub head_shared_labels: usize,
    pub tail_shared_labels: usize,
    /// Shared payoff M on the full training set.
    pub payoff: f64,
    /// Coverage-weighted expected true positives on the rare tail.
    pub tail_recall: f64,
    pub val_metrics: MetricSummary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub players: Vec<PlayerModel>,
    pub partition: Partition,
    pub frequencies: FrequencyTable,
    pub diagnostics: Vec<EpochDiagnostics>,
    /// Phi on the training set before the first update.
    pub initial_phi: f64,
    /// Epoch whose parameters `players` holds (the best validation epoch
    /// under patience stopping, otherwise the last epoch run).
    pub best_epoch: usize,
}

struct EpochStats {
    payoff: f64,
    per_player: Vec<RewardBreakdown>,
    phi: f64,
    tail_recall: f64,
}

#[allow(clippy::too_many_arguments)]
fn epoch_stats(
    players: &[PlayerModel],
    features: &[Vec<f64>],
    y: &[Vec<bool>],
    partition: &Partition,
    ctx: &FusionContext,
    cover: &CoverIndex,
    table: &FrequencyTable,
    curiosity: &CuriositySpec,
    surrogate: &SurrogateSpec,
    rare_tail: &[usize],
) -> Result<EpochStats> {
    let n = players.len();
    let mut fused_rows: Vec<Vec<f64>> = Vec::with_capacity(features.len());
    let mut r_sums = vec![0.0; n];
    let mut d_sums = vec![0.0; n];
    for (m, x) in features.iter().enumerate() {
        let outs: Vec<PlayerOutput> =
            players.iter().map(|p| player_forward(p, x)).collect::<Result<_>>()?;
        let fused = ctx.fuse_and_threshold(&outs)?;
        for i in 0..n {
            r_sums[i] += rarity_bonus(
                &partition.blocks()[i],
                &fused,
                &y[m],
                table,
                curiosity.correctness_mode,
            )?;
            d_sums[i] += disagreement_indexed(i, &outs, partition, cover)?;
        }
        fused_rows.push(fused.probs);
    }
    let payoff = surrogate_score(&fused_rows, y, surrogate)?;
    let count = features.len() as f64;
    let mut per_player = Vec::with_capacity(n);
    let mut curiosities = Vec::with_capacity(n);
    for i in 0..n {
        let r = r_sums[i] / count;
        let d = d_sums[i] / count;
        let c = r + curiosity.beta * d;
        per_player.push(RewardBreakdown { r, d, c, j: payoff + curiosity.alpha * c });
        curiosities.push(c);
    }
    let phi = potential(payoff, &curiosities, curiosity.alpha);
    let tail_recall =
        crate::rewards::tail_recall_surrogate(&fused_rows, y, table, rare_tail, partition)?;
    Ok(EpochStats { payoff, per_player, phi, tail_recall })
}

/// Fused probabilities and thresholded decisions for every sample.
pub fn fused_scores(
    players: &[PlayerModel],
    ctx: &FusionContext,
    features: &[Vec<f64>],
) -> Result<(Vec<Vec<f64>>, Vec<Vec<bool>>)> {
    if features.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut scores = Vec::with_capacity(features.len());
    let mut decisions = Vec::with_capacity(features.len());
    for x in features {
        let outs: Vec<PlayerOutput> =
            players.iter().map(|p| player_forward(p, x)).collect::<Result<_>>()?;
        let fused = ctx.fuse_and_threshold(&outs)?;
        scores.push(fused.probs);
        decisions.push(fused.decisions);
    }
    Ok((scores, decisions))
}

/// Evaluates fused predictions of `players` on one split.
pub fn evaluate_players(
    players: &[PlayerModel],
    ctx: &FusionContext,
    features: &[Vec<f64>],
    y: &[Vec<bool>],
    tail: &[usize],
    ks: &[usize],
) -> Result<MetricReport> {
    let (scores, decisions) = fused_scores(players, ctx, features)?;
    metric_report(&scores, &decisions, y, tail, ks)
}

/// Rewrites `base` with per-label thresholds fitted on held-out data: each
/// label gets the midpoint cut that maximizes its F1 over the fused scores.
/// Labels the scan cannot improve keep the configured global threshold.
pub fn tune_fusion_on_split(
    players: &[PlayerModel],
    partition: &Partition,
    base: &FusionSpec,
    features: &[Vec<f64>],
    y: &[Vec<bool>],
) -> Result<FusionSpec> {
    let ctx = FusionContext::new(partition, base)?;
    let (scores, _) = fused_scores(players, &ctx, features)?;
    let default_tau = match &base.thresholds {
        Thresholds::Global(t) => *t,
        Thresholds::PerLabel(_) => 0.5,
    };
    let taus = tune_thresholds(&scores, y, default_tau)?;
    Ok(FusionSpec { thresholds: Thresholds::PerLabel(taus), ..base.clone() })
}

/// Test metrics under validation-tuned per-label thresholds. This is the
/// evaluation protocol of the experiment commands: decision cuts come from
/// the validation split, never from test data.
pub fn tuned_test_metrics(
    outcome: &TrainOutcome,
    config: &TrainConfig,
    val_set: &MultiLabelDataset,
    test_set: &MultiLabelDataset,
) -> Result<MetricReport> {
    let tuned = tune_fusion_on_split(
        &outcome.players,
        &outcome.partition,
        &config.fusion,
        val_set.features(),
        &val_set.label_rows(),
    )?;
    let ctx = FusionContext::new(&outcome.partition, &tuned)?;
    let rare = split_head_tail(&outcome.frequencies, &config.metrics.rare_split)?;
    evaluate_players(
        &outcome.players,
        &ctx,
        test_set.features(),
        &test_set.label_rows(),
        rare.tail(),
        &config.metrics.ks,
    )
}

fn check_split_compat(train: &MultiLabelDataset, other: &MultiLabelDataset, name: &str) -> Result<()> {
    if other.num_labels() != train.num_labels() || other.feature_dim() != train.feature_dim() {
        return Err(Error::ShapeMismatch(format!(
            "{name} split has {} labels / {} features, train has {} / {}",
            other.num_labels(),
            other.feature_dim(),
            train.num_labels(),
            train.feature_dim()
        )));
    }
    if other.num_samples() == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok(())
}

/// Number of validation samples in the fixed probe batch used for the
/// disagreement trace.
pub const PROBE_SAMPLES: usize = 256;

/// Runs cyclic best-response training and returns the final players with
/// their per-epoch diagnostics. Identical inputs and seed give identical
/// outputs.
pub fn train(
    train_set: &MultiLabelDataset,
    val_set: &MultiLabelDataset,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    if train_set.num_samples() == 0 {
        return Err(Error::EmptyDataset);
    }
    check_split_compat(train_set, val_set, "validation")?;
    config.validate(train_set.num_labels())?;

    let table = compute_frequencies(train_set)?;
    let partition = partition_labels(&table, config.n_players, config.rho)?;
    let ctx = FusionContext::new(&partition, &config.fusion)?;
    let cover = CoverIndex::new(&partition);
    let rare = split_head_tail(&table, &config.metrics.rare_split)?;
    let dynamics = split_head_tail(&table, &config.dynamics_split)?;

    let mut players = init_players(
        &partition,
        train_set.feature_dim(),
        config.init_sigma,
        math::mix_seed(config.seed, INIT_STREAM),
    )?;
    let mut opt_state = OptimizerState::new(&players);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(math::mix_seed(config.seed, SHUFFLE_STREAM));

    let x_train = train_set.features();
    let y_train = train_set.label_rows();
    let x_val = val_set.features();
    let y_val = val_set.label_rows();
    let probe_len = val_set.num_samples().min(PROBE_SAMPLES);

    let initial = epoch_stats(
        &players,
        x_train,
        &y_train,
        &partition,
        &ctx,
        &cover,
        &table,
        &config.curiosity,
        &config.surrogate,
        rare.tail(),
    )?;
    let initial_phi = initial.phi;

    let mut diagnostics: Vec<EpochDiagnostics> = Vec::new();
    let mut prev_phi = initial_phi;
    let mut best: Option<(f64, usize, Vec<PlayerModel>)> = None;
    let mut order: Vec<usize> = (0..train_set.num_samples()).collect();

    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut batch_x: Vec<Vec<f64>> = Vec::with_capacity(config.batch_size);
        let mut batch_y: Vec<Vec<bool>> = Vec::with_capacity(config.batch_size);
        for chunk in order.chunks(config.batch_size) {
            batch_x.clear();
            batch_y.clear();
            for &m in chunk {
                batch_x.push(x_train[m].clone());
                batch_y.push(y_train[m].clone());
            }
            for i in 0..players.len() {
                let grad = player_gradient(
                    i,
                    &players,
                    &batch_x,
                    &batch_y,
                    &partition,
                    &ctx,
                    &table,
                    &config.curiosity,
                    &config.surrogate,
                )?;
                apply_update(
                    &mut players[i],
                    &grad,
                    config.eta(i),
                    &config.optimizer,
                    opt_state.player_mut(i),
                )?;
                if !players[i].params_finite() {
                    return Err(Error::NumericalDivergence);
                }
            }
        }

        let stats = epoch_stats(
            &players,
            x_train,
            &y_train,
            &partition,
            &ctx,
            &cover,
            &table,
            &config.curiosity,
            &config.surrogate,
            rare.tail(),
        )?;

        let mut val_outputs: Vec<Vec<PlayerOutput>> = Vec::with_capacity(x_val.len());
        let mut val_scores: Vec<Vec<f64>> = Vec::with_capacity(x_val.len());
        for x in x_val {
            let outs: Vec<PlayerOutput> =
                players.iter().map(|p| player_forward(p, x)).collect::<Result<_>>()?;
            val_scores.push(ctx.fuse(&outs)?);
            val_outputs.push(outs);
        }
        let val_decisions: Vec<Vec<bool>> = val_scores
            .iter()
            .map(|row| threshold(row, ctx.thresholds()))
            .collect::<Result<_>>()?;
        let split_kl = disagreement_by_split(&val_outputs[..probe_len], &partition, &dynamics)?;
        let val_report =
            metric_report(&val_scores, &val_decisions, &y_val, rare.tail(), &config.metrics.ks)?;
        let val_summary = val_report.summary();

        diagnostics.push(EpochDiagnostics {
            epoch,
            phi: stats.phi,
            phi_delta: stats.phi - prev_phi,
            per_player: stats.per_player,
            kl_head: split_kl.kl_head,
            kl_tail: split_kl.kl_tail,
            head_shared_labels: split_kl.head_shared_labels,
            tail_shared_labels: split_kl.tail_shared_labels,
            payoff: stats.payoff,
            tail_recall: stats.tail_recall,
            val_metrics: val_summary.clone(),
        });
        prev_phi = stats.phi;

        if let StoppingRule::Patience { patience, metric } = config.stopping {
            let value = metric.value(&val_summary);
            let improved = best.as_ref().map_or(true, |(b, _, _)| value > *b);
            if improved {
                best = Some((value, epoch, players.clone()));
            } else if epoch - best.as_ref().unwrap().1 >= patience {
                break;
            }
        }
    }

    let (players, best_epoch) = match (config.stopping, best) {
        (StoppingRule::Patience { .. }, Some((_, epoch, snapshot))) => (snapshot, epoch),
        _ => {
            let last = diagnostics.last().map_or(0, |d| d.epoch);
            (players, last)
        }
    };

    Ok(TrainOutcome {
        players,
        partition,
        frequencies: table,
        diagnostics,
        initial_phi,
        best_epoch,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum AblationVariant {
    Full,
    NoCuriosity,
    SinglePredictor,
}

impl AblationVariant {
    pub const ALL: [AblationVariant; 3] =
        [AblationVariant::Full, AblationVariant::NoCuriosity, AblationVariant::SinglePredictor];

    pub fn name(&self) -> &'static str {
        match self {
            AblationVariant::Full => "full",
            AblationVariant::NoCuriosity => "no_curiosity",
            AblationVariant::SinglePredictor => "single_predictor",
        }
    }
}

/// The base config rewritten for one ablation arm.
///
/// `no_curiosity` zeroes alpha; `single_predictor` collapses to one player
/// with alpha 0 and rarity weights 1/(1+freq) inside the payoff surrogate.
pub fn variant_config(
    base: &TrainConfig,
    variant: AblationVariant,
    table: &FrequencyTable,
) -> TrainConfig {
    let mut config = base.clone();
    match variant {
        AblationVariant::Full => {}
        AblationVariant::NoCuriosity => {
            config.curiosity.alpha = 0.0;
        }
        AblationVariant::SinglePredictor => {
            config.n_players = 1;
            config.rho = 0.0;
            config.curiosity.alpha = 0.0;
            config.surrogate.label_weights = Some(table.rarity_weights());
        }
    }
    config
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationOutcome {
    pub variant: AblationVariant,
    pub outcome: TrainOutcome,
    pub test_metrics: MetricReport,
}

/// Trains one ablation arm and evaluates it on the test split with
/// validation-tuned per-label thresholds. The rare tail is cut from
/// training-set frequencies.
pub fn ablation_run(
    train_set: &MultiLabelDataset,
    val_set: &MultiLabelDataset,
    test_set: &MultiLabelDataset,
    base: &TrainConfig,
    variant: AblationVariant,
) -> Result<AblationOutcome> {
    check_split_compat(train_set, test_set, "test")?;
    let table = compute_frequencies(train_set)?;
    let config = variant_config(base, variant, &table);
    let outcome = train(train_set, val_set, &config)?;
    let test_metrics = tuned_test_metrics(&outcome, &config, val_set, test_set)?;
    Ok(AblationOutcome { variant, outcome, test_metrics })
}
