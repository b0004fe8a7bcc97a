//! Evaluation metrics: micro/macro/rare F1, precision@k, mean average
//! precision, and per-player specialization ranks.
//!
//! Zero-denominator conventions: a label with no true positives, no false
//! positives, and no false negatives counts as F1 = 1 in the macro average
//! (predicting nothing for an absent label is correct); pooled micro-style
//! scores with an empty denominator are 0.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::fusion::Thresholds;
use crate::label_space::HeadTailSplit;
use crate::player::{player_forward, PlayerModel};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LabelMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Full evaluation of one dataset split.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricReport {
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub rare_f1: f64,
    pub map: f64,
    pub p_at_k: BTreeMap<usize, f64>,
    pub per_label: Vec<LabelMetrics>,
}

/// The headline numbers of a [`MetricReport`], logged per epoch.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricSummary {
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub rare_f1: f64,
    pub map: f64,
    pub p_at_k: BTreeMap<usize, f64>,
}

impl MetricReport {
    pub fn summary(&self) -> MetricSummary {
        MetricSummary {
            micro_f1: self.micro_f1,
            macro_f1: self.macro_f1,
            rare_f1: self.rare_f1,
            map: self.map,
            p_at_k: self.p_at_k.clone(),
        }
    }
}

fn check_rows<T, U>(a: &[Vec<T>], b: &[Vec<U>]) -> Result<usize> {
    if a.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch(format!("{} rows vs {}", a.len(), b.len())));
    }
    let width = a[0].len();
    for (m, (x, y)) in a.iter().zip(b).enumerate() {
        if x.len() != width || y.len() != width {
            return Err(Error::ShapeMismatch(format!("row {m} has inconsistent width")));
        }
    }
    Ok(width)
}

#[derive(Clone, Copy, Default)]
struct Counts {
    tp: usize,
    fp: usize,
    fn_: usize,
}

fn label_counts(pred: &[Vec<bool>], y: &[Vec<bool>]) -> Result<Vec<Counts>> {
    let width = check_rows(pred, y)?;
    let mut counts = vec![Counts::default(); width];
    for (p_row, y_row) in pred.iter().zip(y) {
        for (l, (&p, &t)) in p_row.iter().zip(y_row).enumerate() {
            match (p, t) {
                (true, true) => counts[l].tp += 1,
                (true, false) => counts[l].fp += 1,
                (false, true) => counts[l].fn_ += 1,
                (false, false) => {}
            }
        }
    }
    Ok(counts)
}

fn pooled_f1(counts: impl Iterator<Item = Counts>) -> f64 {
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for c in counts {
        tp += c.tp;
        fp += c.fp;
        fn_ += c.fn_;
    }
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

/// (micro, macro, rare) F1 of binary decisions. `tail` lists the label ids
/// pooled into the rare score.
pub fn f1_scores(
    pred: &[Vec<bool>],
    y: &[Vec<bool>],
    tail: &[usize],
) -> Result<(f64, f64, f64)> {
    let counts = label_counts(pred, y)?;
    let width = counts.len();
    for &l in tail {
        if l >= width {
            return Err(Error::LabelOutOfRange { label: l, num_labels: width });
        }
    }
    let micro = pooled_f1(counts.iter().copied());
    let macro_f1 = counts
        .iter()
        .map(|c| {
            let denom = 2 * c.tp + c.fp + c.fn_;
            if denom == 0 {
                1.0
            } else {
                2.0 * c.tp as f64 / denom as f64
            }
        })
        .sum::<f64>()
        / width as f64;
    let rare = pooled_f1(tail.iter().map(|&l| counts[l]));
    Ok((micro, macro_f1, rare))
}

/// Per-label precision/recall/F1 with the same zero conventions as the
/// macro average (empty label: all three are 1).
pub fn per_label_metrics(pred: &[Vec<bool>], y: &[Vec<bool>]) -> Result<Vec<LabelMetrics>> {
    let counts = label_counts(pred, y)?;
    Ok(counts
        .iter()
        .map(|c| {
            let precision = if c.tp + c.fp == 0 {
                if c.fn_ == 0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                c.tp as f64 / (c.tp + c.fp) as f64
            };
            let recall = if c.tp + c.fn_ == 0 {
                if c.fp == 0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                c.tp as f64 / (c.tp + c.fn_) as f64
            };
            let denom = 2 * c.tp + c.fp + c.fn_;
            let f1 = if denom == 0 { 1.0 } else { 2.0 * c.tp as f64 / denom as f64 };
            LabelMetrics { precision, recall, f1 }
        })
        .collect())
}

/// Mean over samples of the fraction of true labels among the k
/// highest-scoring ones. Score ties prefer the lower label id.
pub fn precision_at_k(scores: &[Vec<f64>], y: &[Vec<bool>], k: usize) -> Result<f64> {
    let width = check_rows(scores, y)?;
    if k == 0 || k > width {
        return Err(Error::InvalidParameter(format!(
            "k must be in [1, {width}], got {k}"
        )));
    }
    let mut total = 0.0;
    for (s_row, y_row) in scores.iter().zip(y) {
        let mut order: Vec<usize> = (0..width).collect();
        order.sort_by(|&a, &b| s_row[b].partial_cmp(&s_row[a]).unwrap().then(a.cmp(&b)));
        let hits = order[..k].iter().filter(|&&l| y_row[l]).count();
        total += hits as f64 / k as f64;
    }
    Ok(total / scores.len() as f64)
}

/// Mean over labels (with at least one positive sample) of average
/// precision over the per-label sample ranking. Equal scores keep the
/// original sample order.
pub fn mean_average_precision(scores: &[Vec<f64>], y: &[Vec<bool>]) -> Result<f64> {
    let width = check_rows(scores, y)?;
    let mut ap_sum = 0.0;
    let mut evaluated = 0usize;
    for l in 0..width {
        let positives = y.iter().filter(|row| row[l]).count();
        if positives == 0 {
            continue;
        }
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[b][l].partial_cmp(&scores[a][l]).unwrap().then(a.cmp(&b)));
        let mut seen_pos = 0usize;
        let mut ap = 0.0;
        for (rank0, &sample) in order.iter().enumerate() {
            if y[sample][l] {
                seen_pos += 1;
                ap += seen_pos as f64 / (rank0 + 1) as f64;
            }
        }
        ap_sum += ap / positives as f64;
        evaluated += 1;
    }
    if evaluated == 0 {
        return Err(Error::InvalidParameter(
            "mean average precision needs at least one label with a positive sample".into(),
        ));
    }
    Ok(ap_sum / evaluated as f64)
}

/// Builds the full report for one evaluated split.
pub fn metric_report(
    scores: &[Vec<f64>],
    decisions: &[Vec<bool>],
    y: &[Vec<bool>],
    tail: &[usize],
    ks: &[usize],
) -> Result<MetricReport> {
    let (micro_f1, macro_f1, rare_f1) = f1_scores(decisions, y, tail)?;
    let map = mean_average_precision(scores, y)?;
    let mut p_at_k = BTreeMap::new();
    for &k in ks {
        p_at_k.insert(k, precision_at_k(scores, y, k)?);
    }
    let per_label = per_label_metrics(decisions, y)?;
    Ok(MetricReport { micro_f1, macro_f1, rare_f1, map, p_at_k, per_label })
}

/// One player's standing on one side of the head/tail split.
///
/// Players covering no label of the split are excluded from the ranking
/// (`micro_f1` and `rank` are `None`).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PlayerSpecialization {
    pub player_id: usize,
    pub covered_labels: usize,
    pub micro_f1: Option<f64>,
    pub rank: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpecializationReport {
    pub head: Vec<PlayerSpecialization>,
    pub tail: Vec<PlayerSpecialization>,
}

/// Ranks players by their own (unfused) micro-F1 over the head and tail
/// labels they cover. Rank 1 is best; equal scores rank the lower player id
/// first.
pub fn specialization_ranks(
    players: &[PlayerModel],
    features: &[Vec<f64>],
    y: &[Vec<bool>],
    split: &HeadTailSplit,
    thresholds: &Thresholds,
) -> Result<SpecializationReport> {
    if features.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if features.len() != y.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} feature rows vs {} label rows",
            features.len(),
            y.len()
        )));
    }

    let mut outputs: Vec<Vec<crate::player::PlayerOutput>> = Vec::with_capacity(features.len());
    for x in features {
        let per_player: Result<Vec<_>> =
            players.iter().map(|p| player_forward(p, x)).collect();
        outputs.push(per_player?);
    }

    let side = |want_tail: bool| -> Result<Vec<PlayerSpecialization>> {
        let mut scored: Vec<(usize, usize, Option<f64>)> = Vec::with_capacity(players.len());
        for (i, player) in players.iter().enumerate() {
            let rows: Vec<usize> = player
                .label_block
                .iter()
                .enumerate()
                .filter(|(_, &l)| split.is_tail(l) == want_tail)
                .map(|(row, _)| row)
                .collect();
            if rows.is_empty() {
                scored.push((i, 0, None));
                continue;
            }
            let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
            for (m, per_player) in outputs.iter().enumerate() {
                for &row in &rows {
                    let l = player.label_block[row];
                    let pred = per_player[i].probs[row] > thresholds.for_label(l);
                    match (pred, y[m][l]) {
                        (true, true) => tp += 1,
                        (true, false) => fp += 1,
                        (false, true) => fn_ += 1,
                        (false, false) => {}
                    }
                }
            }
            let denom = 2 * tp + fp + fn_;
            let f1 = if denom == 0 { 0.0 } else { 2.0 * tp as f64 / denom as f64 };
            scored.push((i, rows.len(), Some(f1)));
        }
        let mut ranked: Vec<usize> = scored
            .iter()
            .filter(|(_, _, f1)| f1.is_some())
            .map(|&(i, _, _)| i)
            .collect();
        ranked.sort_by(|&a, &b| {
            let fa = scored[a].2.unwrap();
            let fb = scored[b].2.unwrap();
            fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
        });
        let mut rank_of = vec![None; players.len()];
        for (pos, &i) in ranked.iter().enumerate() {
            rank_of[i] = Some(pos + 1);
        }
        Ok(scored
            .into_iter()
            .map(|(i, covered, f1)| PlayerSpecialization {
                player_id: i,
                covered_labels: covered,
                micro_f1: f1,
                rank: rank_of[i],
            })
            .collect())
    };

    Ok(SpecializationReport { head: side(false)?, tail: side(true)? })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(rows: &[&[u8]]) -> Vec<Vec<bool>> {
        rows.iter().map(|r| r.iter().map(|&v| v != 0).collect()).collect()
    }

    #[test]
    fn f1_hand_case() {
        // Two samples, three labels.
        let pred = b(&[&[1, 0, 1], &[0, 0, 1]]);
        let y = b(&[&[1, 1, 0], &[0, 0, 1]]);
        // Pooled: tp=2, fp=1, fn=1 -> micro = 4/6.
        // Per label: l0 tp1 -> 1; l1 fn1 -> 0; l2 tp1 fp1 -> 2/3.
        let (micro, macro_f1, rare) = f1_scores(&pred, &y, &[1, 2]).unwrap();
        assert!((micro - 2.0 / 3.0).abs() < 1e-15);
        assert!((macro_f1 - (1.0 + 0.0 + 2.0 / 3.0) / 3.0).abs() < 1e-15);
        // Tail pools labels 1 and 2: tp=1, fp=1, fn=1 -> 2/4.
        assert!((rare - 0.5).abs() < 1e-15);
    }

    #[test]
    fn absent_label_counts_as_perfect_in_macro() {
        let pred = b(&[&[0, 1], &[0, 1]]);
        let y = b(&[&[0, 1], &[0, 1]]);
        let (micro, macro_f1, _) = f1_scores(&pred, &y, &[0]).unwrap();
        assert_eq!(micro, 1.0);
        assert_eq!(macro_f1, 1.0);
        let per_label = per_label_metrics(&pred, &y).unwrap();
        assert_eq!(per_label[0].f1, 1.0);
        assert_eq!(per_label[0].precision, 1.0);
    }

    #[test]
    fn empty_pool_scores_zero() {
        let pred = b(&[&[0, 0]]);
        let y = b(&[&[0, 0]]);
        let (micro, macro_f1, rare) = f1_scores(&pred, &y, &[1]).unwrap();
        assert_eq!(micro, 0.0);
        assert_eq!(macro_f1, 1.0);
        assert_eq!(rare, 0.0);
    }

    #[test]
    fn precision_at_k_hand_case_with_ties() {
        let scores = vec![vec![0.9, 0.8, 0.1], vec![0.5, 0.5, 0.5]];
        let y = b(&[&[1, 0, 0], &[0, 1, 0]]);
        // Sample 1: top-1 = label 0 (hit). Sample 2: all tied, label 0 wins
        // the tie (miss).
        assert!((precision_at_k(&scores, &y, 1).unwrap() - 0.5).abs() < 1e-15);
        // Top-2 of sample 2 under ties is {0, 1}: one hit.
        let p2 = precision_at_k(&scores, &y, 2).unwrap();
        assert!((p2 - (0.5 + 0.5) / 2.0).abs() < 1e-15);
        assert!(precision_at_k(&scores, &y, 4).is_err());
        assert!(precision_at_k(&scores, &y, 0).is_err());
    }

    #[test]
    fn average_precision_hand_case() {
        // One label, four samples scored 0.9, 0.8, 0.7, 0.6 with positives
        // at ranks 1 and 3: AP = (1/1 + 2/3) / 2.
        let scores = vec![vec![0.9], vec![0.8], vec![0.7], vec![0.6]];
        let y = b(&[&[1], &[0], &[1], &[0]]);
        let map = mean_average_precision(&scores, &y).unwrap();
        assert!((map - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn map_ties_keep_sample_order() {
        // Both samples score 0.5; the positive is the second sample, so it
        // sits at rank 2 under the order-preserving tie rule.
        let scores = vec![vec![0.5], vec![0.5]];
        let y = b(&[&[0], &[1]]);
        let map = mean_average_precision(&scores, &y).unwrap();
        assert!((map - 0.5).abs() < 1e-15);
    }

    #[test]
    fn map_skips_labels_without_positives_and_errors_when_none() {
        let scores = vec![vec![0.9, 0.1], vec![0.2, 0.8]];
        let y = b(&[&[1, 0], &[0, 0]]);
        // Label 1 has no positives; mAP is label 0's AP alone.
        let map = mean_average_precision(&scores, &y).unwrap();
        assert_eq!(map, 1.0);
        let none = b(&[&[0, 0], &[0, 0]]);
        assert!(mean_average_precision(&scores, &none).is_err());
    }

    #[test]
    fn specialization_ranks_by_own_predictions() {
        use crate::label_space::{split_head_tail, FrequencyTable, SplitRule};
        let ft =
            FrequencyTable::from_frequencies(vec![0.9, 0.5, 0.4, 0.3, 0.2, 0.1], 10).unwrap();
        let split = split_head_tail(&ft, &SplitRule::CountFraction(0.5)).unwrap();
        assert_eq!(split.tail(), &[3, 4, 5]);

        // Player 0 covers labels 0..3 (one tail label), player 1 covers 3..6.
        // Hand-built weights so that player 0 nails everything it covers and
        // player 1 misses its tail labels.
        let players = vec![
            PlayerModel {
                id: 0,
                label_block: vec![0, 1, 2, 3],
                weights: vec![vec![10.0], vec![10.0], vec![10.0], vec![10.0]],
                bias: vec![-5.0; 4],
            },
            PlayerModel {
                id: 1,
                label_block: vec![3, 4, 5],
                weights: vec![vec![10.0], vec![-10.0], vec![-10.0]],
                bias: vec![-5.0; 3],
            },
        ];
        // One positive sample (x=1) carrying every label, one negative (x=0)
        // carrying none.
        let features = vec![vec![1.0], vec![0.0]];
        let y = b(&[&[1, 1, 1, 1, 1, 1], &[0, 0, 0, 0, 0, 0]]);
        let report = specialization_ranks(
            &players,
            &features,
            &y,
            &split,
            &Thresholds::Global(0.5),
        )
        .unwrap();
        // Head side: only player 0 covers head labels (0, 1, 2).
        assert_eq!(report.head[0].rank, Some(1));
        assert_eq!(report.head[0].micro_f1, Some(1.0));
        assert_eq!(report.head[1].rank, None);
        assert_eq!(report.head[1].covered_labels, 0);
        // Tail side: player 0 predicts its one tail label perfectly; player 1
        // misses labels 4 and 5.
        assert_eq!(report.tail[0].rank, Some(1));
        let p1_tail = report.tail[1].micro_f1.unwrap();
        assert!(p1_tail < 1.0);
        assert_eq!(report.tail[1].rank, Some(2));
    }
}
