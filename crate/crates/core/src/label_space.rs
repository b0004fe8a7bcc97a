//! Label frequencies, head/tail splits, and the per-player block partition.
//!
//! Everything downstream keys off the frequency ranking: labels sorted by
//! empirical frequency, most frequent first, lower id first on ties. The
//! partition slices that ranking into contiguous cores of `floor(L / N)`
//! ranks (the remainder goes to the last player) and extends each core by
//! `floor(S * rho / 2)` ranks on both sides, clipped at the ends, so that
//! neighbouring players share a band of labels.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::data::MultiLabelDataset;
use crate::math;
use crate::{Error, Result};

/// Empirical per-label positive frequencies of one dataset split.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyTable {
    freqs: Vec<f64>,
    num_samples: usize,
}

impl FrequencyTable {
    /// Builds a table from raw frequencies, for callers that already have
    /// them (tests, hand-constructed scenarios). Values must lie in [0, 1].
    pub fn from_frequencies(freqs: Vec<f64>, num_samples: usize) -> Result<Self> {
        if freqs.is_empty() {
            return Err(Error::InvalidParameter("frequency table needs >= 1 label".into()));
        }
        for (l, &f) in freqs.iter().enumerate() {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::InvalidParameter(format!(
                    "frequency of label {l} is {f}, outside [0, 1]"
                )));
            }
        }
        Ok(Self { freqs, num_samples })
    }

    pub fn num_labels(&self) -> usize {
        self.freqs.len()
    }

    pub fn num_samples(&self) -> usize {
        self.num_samples
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn freq(&self, label: usize) -> Result<f64> {
        self.freqs
            .get(label)
            .copied()
            .ok_or(Error::LabelOutOfRange { label, num_labels: self.freqs.len() })
    }

    /// Rarity weight `1 / (1 + freq(label))`, in (0.5, 1].
    pub fn rarity_weight(&self, label: usize) -> Result<f64> {
        Ok(1.0 / (1.0 + self.freq(label)?))
    }

    /// All rarity weights, indexed by label id.
    pub fn rarity_weights(&self) -> Vec<f64> {
        self.freqs.iter().map(|f| 1.0 / (1.0 + f)).collect()
    }

    /// Label ids sorted most frequent first; equal frequencies keep the
    /// lower id first.
    pub fn rank_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.freqs.len()).collect();
        order.sort_by(|&a, &b| {
            self.freqs[b].partial_cmp(&self.freqs[a]).unwrap().then(a.cmp(&b))
        });
        order
    }
}

/// Fraction of samples carrying each label.
pub fn compute_frequencies(dataset: &MultiLabelDataset) -> Result<FrequencyTable> {
    let m = dataset.num_samples();
    if m == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut counts = vec![0usize; dataset.num_labels()];
    for set in dataset.label_sets() {
        for &l in set {
            counts[l] += 1;
        }
    }
    FrequencyTable::from_frequencies(
        counts.iter().map(|&c| c as f64 / m as f64).collect(),
        m,
    )
}

/// Rule for cutting the frequency ranking into a head and a tail.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SplitRule {
    /// The tail is the `ceil(fraction * L)` least frequent labels; on equal
    /// frequency the higher label id counts as rarer.
    CountFraction(f64),
    /// The head is the minimal most-frequent-first prefix whose frequencies
    /// sum to at least `fraction` of the total frequency mass.
    CumulativeMass(f64),
}

impl SplitRule {
    fn fraction(&self) -> f64 {
        match *self {
            SplitRule::CountFraction(f) | SplitRule::CumulativeMass(f) => f,
        }
    }
}

impl Default for SplitRule {
    fn default() -> Self {
        SplitRule::CountFraction(0.2)
    }
}

/// A disjoint, exhaustive head/tail division of the label space.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadTailSplit {
    head: Vec<usize>,
    tail: Vec<usize>,
    tail_mask: Vec<bool>,
}

impl HeadTailSplit {
    /// Head label ids, ascending.
    pub fn head(&self) -> &[usize] {
        &self.head
    }

    /// Tail label ids, ascending.
    pub fn tail(&self) -> &[usize] {
        &self.tail
    }

    pub fn is_tail(&self, label: usize) -> bool {
        self.tail_mask.get(label).copied().unwrap_or(false)
    }

    fn from_tail_mask(tail_mask: Vec<bool>) -> Self {
        let mut head = Vec::new();
        let mut tail = Vec::new();
        for (l, &t) in tail_mask.iter().enumerate() {
            if t {
                tail.push(l);
            } else {
                head.push(l);
            }
        }
        Self { head, tail, tail_mask }
    }
}

pub fn split_head_tail(table: &FrequencyTable, rule: &SplitRule) -> Result<HeadTailSplit> {
    let f = rule.fraction();
    if !(f > 0.0 && f < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "head/tail fraction must be in (0, 1), got {f}"
        )));
    }
    let num_labels = table.num_labels();
    let mut tail_mask = vec![false; num_labels];
    match *rule {
        SplitRule::CountFraction(_) => {
            let tail_len = math::ceil(f * num_labels as f64) as usize;
            let mut order: Vec<usize> = (0..num_labels).collect();
            // Rarest first; on ties the higher id is the rarer one.
            order.sort_by(|&a, &b| {
                table.freqs()[a]
                    .partial_cmp(&table.freqs()[b])
                    .unwrap()
                    .then(b.cmp(&a))
            });
            for &l in order.iter().take(tail_len.min(num_labels)) {
                tail_mask[l] = true;
            }
        }
        SplitRule::CumulativeMass(_) => {
            let total: f64 = table.freqs().iter().sum();
            let needed = f * total;
            let mut cum = 0.0;
            let mut in_head = vec![false; num_labels];
            for &l in &table.rank_order() {
                if cum >= needed {
                    break;
                }
                in_head[l] = true;
                cum += table.freqs()[l];
            }
            for (l, &h) in in_head.iter().enumerate() {
                tail_mask[l] = !h;
            }
        }
    }
    Ok(HeadTailSplit::from_tail_mask(tail_mask))
}

/// Assignment of frequency-contiguous, overlapping label blocks to players.
///
/// `blocks[i]` is player i's full label block, `cores[i]` the exclusive part
/// it alone is responsible for, and `overlaps[i]` the labels it shares with
/// at least one other player. All three store label ids in frequency-rank
/// order (most frequent first).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Partition {
    #[cfg_attr(feature = "serde", serde(rename = "N"))]
    n_players: usize,
    rho: f64,
    num_labels: usize,
    blocks: Vec<Vec<usize>>,
    cores: Vec<Vec<usize>>,
    overlaps: Vec<Vec<usize>>,
}

impl Partition {
    pub fn n_players(&self) -> usize {
        self.n_players
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn cores(&self) -> &[Vec<usize>] {
        &self.cores
    }

    /// Labels of block i that some other block also covers.
    pub fn overlaps(&self) -> &[Vec<usize>] {
        &self.overlaps
    }

    /// How many players cover each label, indexed by label id.
    pub fn cover_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.num_labels];
        for block in &self.blocks {
            for &l in block {
                counts[l] += 1;
            }
        }
        counts
    }

    /// Re-checks the structural invariants; used when a partition arrives
    /// from a checkpoint rather than from `partition_labels`.
    pub fn validate(&self) -> Result<()> {
        if self.blocks.len() != self.n_players
            || self.cores.len() != self.n_players
            || self.overlaps.len() != self.n_players
        {
            return Err(Error::ShapeMismatch(format!(
                "partition claims {} players but stores {}/{}/{} block/core/overlap lists",
                self.n_players,
                self.blocks.len(),
                self.cores.len(),
                self.overlaps.len()
            )));
        }
        let mut core_seen = vec![false; self.num_labels];
        for core in &self.cores {
            for &l in core {
                if l >= self.num_labels {
                    return Err(Error::LabelOutOfRange { label: l, num_labels: self.num_labels });
                }
                if core_seen[l] {
                    return Err(Error::InvalidParameter(format!(
                        "label {l} appears in two cores"
                    )));
                }
                core_seen[l] = true;
            }
        }
        if let Some(missing) = core_seen.iter().position(|&s| !s) {
            return Err(Error::InvalidParameter(format!(
                "label {missing} is in no core"
            )));
        }
        for (i, (block, core)) in self.blocks.iter().zip(&self.cores).enumerate() {
            let mut in_block = vec![false; self.num_labels];
            for &l in block {
                if l >= self.num_labels {
                    return Err(Error::LabelOutOfRange { label: l, num_labels: self.num_labels });
                }
                in_block[l] = true;
            }
            if core.iter().any(|&l| !in_block[l]) {
                return Err(Error::InvalidParameter(format!(
                    "core of player {i} is not contained in its block"
                )));
            }
        }
        let counts = self.cover_counts();
        for (i, (block, overlap)) in self.blocks.iter().zip(&self.overlaps).enumerate() {
            let expect: Vec<usize> =
                block.iter().copied().filter(|&l| counts[l] > 1).collect();
            if *overlap != expect {
                return Err(Error::InvalidParameter(format!(
                    "overlap list of player {i} does not match its block intersections"
                )));
            }
        }
        Ok(())
    }
}

/// Cuts the frequency ranking into per-player blocks.
pub fn partition_labels(table: &FrequencyTable, n_players: usize, rho: f64) -> Result<Partition> {
    let num_labels = table.num_labels();
    if n_players == 0 {
        return Err(Error::InvalidParameter("need at least one player".into()));
    }
    if n_players > num_labels {
        return Err(Error::TooManyPlayers { players: n_players, labels: num_labels });
    }
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::InvalidParameter(format!(
            "overlap ratio must be in [0, 1), got {rho}"
        )));
    }

    let ranks = table.rank_order();
    let core_size = num_labels / n_players;
    let half_overlap = math::floor(core_size as f64 * rho / 2.0) as usize;

    let mut blocks = Vec::with_capacity(n_players);
    let mut cores = Vec::with_capacity(n_players);
    for i in 0..n_players {
        let start = i * core_size;
        let end = if i + 1 == n_players { num_labels } else { (i + 1) * core_size };
        let block_start = start.saturating_sub(half_overlap);
        let block_end = (end + half_overlap).min(num_labels);
        cores.push(ranks[start..end].to_vec());
        blocks.push(ranks[block_start..block_end].to_vec());
    }

    let mut counts = vec![0usize; num_labels];
    for block in &blocks {
        for &l in block {
            counts[l] += 1;
        }
    }
    let overlaps = blocks
        .iter()
        .map(|block| block.iter().copied().filter(|&l| counts[l] > 1).collect())
        .collect();

    Ok(Partition { n_players, rho, num_labels, blocks, cores, overlaps })
}

/// Per-label view of a partition: which players cover a label and at which
/// row of their block. Built once and reused in the training hot path.
#[derive(Debug, Clone)]
pub struct CoverIndex {
    covers: Vec<Vec<(usize, usize)>>,
}

impl CoverIndex {
    pub fn new(partition: &Partition) -> Self {
        let mut covers = vec![Vec::new(); partition.num_labels()];
        for (player, block) in partition.blocks().iter().enumerate() {
            for (row, &l) in block.iter().enumerate() {
                covers[l].push((player, row));
            }
        }
        Self { covers }
    }

    /// `(player, row_in_block)` pairs covering `label`, ascending player id.
    pub fn covering(&self, label: usize) -> &[(usize, usize)] {
        &self.covers[label]
    }

    pub fn num_labels(&self) -> usize {
        self.covers.len()
    }
}
