//! Dataset container and synthetic long-tail data.
//!
//! The synthetic generator plants one weight vector per label and assigns
//! positives to the highest-scoring samples, so label prevalences follow a
//! power law in frequency rank while staying linearly predictable from the
//! features. A label-flip noise rate and a rare-positive downsampler provide
//! the corruption knobs used by the robustness experiments.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::math;
use crate::{Error, Result};

/// Dense features with per-sample label-id sets.
///
/// Label ids are kept sorted and deduplicated; every id is below
/// `num_labels` and every feature value is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiLabelDataset {
    features: Vec<Vec<f64>>,
    labels: Vec<Vec<usize>>,
    num_labels: usize,
    feature_dim: usize,
    provenance: String,
}

impl MultiLabelDataset {
    pub fn new(
        features: Vec<Vec<f64>>,
        labels: Vec<Vec<usize>>,
        num_labels: usize,
        feature_dim: usize,
        provenance: String,
    ) -> Result<Self> {
        if feature_dim == 0 {
            return Err(Error::InvalidParameter("feature_dim must be >= 1".into()));
        }
        if num_labels == 0 {
            return Err(Error::InvalidParameter("num_labels must be >= 1".into()));
        }
        if features.len() != labels.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} feature rows vs {} label rows",
                features.len(),
                labels.len()
            )));
        }
        for (i, row) in features.iter().enumerate() {
            if row.len() != feature_dim {
                return Err(Error::ShapeMismatch(format!(
                    "sample {i} has {} features, expected {feature_dim}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "sample {i} has a non-finite feature value"
                )));
            }
        }
        let mut labels = labels;
        for set in labels.iter_mut() {
            set.sort_unstable();
            set.dedup();
            if let Some(&l) = set.last() {
                if l >= num_labels {
                    return Err(Error::LabelOutOfRange { label: l, num_labels });
                }
            }
        }
        Ok(Self { features, labels, num_labels, feature_dim, provenance })
    }

    pub fn num_samples(&self) -> usize {
        self.features.len()
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    /// Sorted label ids of one sample.
    pub fn labels_of(&self, sample: usize) -> &[usize] {
        &self.labels[sample]
    }

    pub fn label_sets(&self) -> &[Vec<usize>] {
        &self.labels
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    /// Per-sample binary label rows (`rows[m][l]` is true when sample `m`
    /// carries label `l`).
    pub fn label_rows(&self) -> Vec<Vec<bool>> {
        self.labels
            .iter()
            .map(|set| {
                let mut row = vec![false; self.num_labels];
                for &l in set {
                    row[l] = true;
                }
                row
            })
            .collect()
    }

    /// Number of positive occurrences of one label.
    pub fn positive_count(&self, label: usize) -> Result<usize> {
        if label >= self.num_labels {
            return Err(Error::LabelOutOfRange { label, num_labels: self.num_labels });
        }
        Ok(self.labels.iter().filter(|set| set.binary_search(&label).is_ok()).count())
    }
}

/// Recipe for a synthetic long-tail dataset.
///
/// Target prevalence of the label at frequency rank `r` (1-based) is
/// `base_prevalence * r^-power_exponent`, capped at 1. Label id equals
/// rank - 1, so lower ids are more frequent by construction.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct SynthSpec {
    pub num_labels: usize,
    pub feature_dim: usize,
    pub num_samples: usize,
    /// Power-law exponent for prevalence decay; must be > 0.
    pub power_exponent: f64,
    /// Prevalence of the most frequent label; in (0, 1].
    pub base_prevalence: f64,
    /// When true, positives are the samples with the highest planted score;
    /// when false, labels are drawn independently of the features.
    pub labels_correlated_with_features: bool,
    /// Probability of flipping each label bit after assignment; in [0, 0.5).
    pub noise_rate: f64,
}

impl SynthSpec {
    fn validate(&self) -> Result<()> {
        if self.num_labels == 0 || self.feature_dim == 0 || self.num_samples == 0 {
            return Err(Error::InvalidParameter(
                "num_labels, feature_dim, and num_samples must all be >= 1".into(),
            ));
        }
        if !(self.power_exponent > 0.0) || !self.power_exponent.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "power_exponent must be > 0, got {}",
                self.power_exponent
            )));
        }
        if !(self.base_prevalence > 0.0 && self.base_prevalence <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "base_prevalence must be in (0, 1], got {}",
                self.base_prevalence
            )));
        }
        if !(self.noise_rate >= 0.0 && self.noise_rate < 0.5) {
            return Err(Error::InvalidParameter(format!(
                "noise_rate must be in [0, 0.5), got {}",
                self.noise_rate
            )));
        }
        Ok(())
    }

    /// Target prevalence of the label at 0-based id `label`.
    pub fn target_prevalence(&self, label: usize) -> f64 {
        let rank = (label + 1) as f64;
        (self.base_prevalence * math::powf(rank, -self.power_exponent)).min(1.0)
    }
}

/// Generates a dataset per `spec`, deterministically for a given seed.
pub fn generate_synthetic(spec: &SynthSpec, seed: u64) -> Result<MultiLabelDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");

    let m = spec.num_samples;
    let features: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..spec.feature_dim).map(|_| normal.sample(&mut rng)).collect())
        .collect();

    let mut label_sets: Vec<Vec<usize>> = vec![Vec::new(); m];
    for l in 0..spec.num_labels {
        let target = spec.target_prevalence(l);
        let positives = math::round(target * m as f64).min(m as f64) as usize;
        if spec.labels_correlated_with_features {
            let planted: Vec<f64> =
                (0..spec.feature_dim).map(|_| normal.sample(&mut rng)).collect();
            let mut scored: Vec<(usize, f64)> = features
                .iter()
                .enumerate()
                .map(|(i, x)| (i, planted.iter().zip(x).map(|(w, v)| w * v).sum()))
                .collect();
            // Highest planted score first; ties keep the lower sample index.
            scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
            for &(i, _) in scored.iter().take(positives) {
                label_sets[i].push(l);
            }
        } else {
            for set in label_sets.iter_mut() {
                if rng.gen::<f64>() < target {
                    set.push(l);
                }
            }
        }
    }

    if spec.noise_rate > 0.0 {
        for set in label_sets.iter_mut() {
            let mut row = vec![false; spec.num_labels];
            for &l in set.iter() {
                row[l] = true;
            }
            for bit in row.iter_mut() {
                if rng.gen::<f64>() < spec.noise_rate {
                    *bit = !*bit;
                }
            }
            *set = row
                .iter()
                .enumerate()
                .filter_map(|(l, &b)| if b { Some(l) } else { None })
                .collect();
        }
    }

    let provenance = format!(
        "synthetic(L={}, d={}, M={}, s={}, p0={}, correlated={}, noise={}, seed={})",
        spec.num_labels,
        spec.feature_dim,
        spec.num_samples,
        spec.power_exponent,
        spec.base_prevalence,
        spec.labels_correlated_with_features,
        spec.noise_rate,
        seed
    );
    MultiLabelDataset::new(features, label_sets, spec.num_labels, spec.feature_dim, provenance)
}

/// Randomly removes positive occurrences of the `k_rarest` labels.
///
/// Rarity is measured on this dataset; ties on frequency treat the higher
/// label id as rarer. Each positive occurrence of a targeted label survives
/// independently with probability `1 - removal_prob`. Samples are never
/// deleted, so a sample can end up with an empty label set.
pub fn downsample_rare(
    dataset: &MultiLabelDataset,
    k_rarest: usize,
    removal_prob: f64,
    seed: u64,
) -> Result<MultiLabelDataset> {
    if k_rarest > dataset.num_labels() {
        return Err(Error::InvalidParameter(format!(
            "k_rarest {} exceeds the {} labels",
            k_rarest,
            dataset.num_labels()
        )));
    }
    if !(0.0..=1.0).contains(&removal_prob) {
        return Err(Error::InvalidParameter(format!(
            "removal_prob must be in [0, 1], got {removal_prob}"
        )));
    }
    let ft = crate::label_space::compute_frequencies(dataset)?;
    let mut order: Vec<usize> = (0..dataset.num_labels()).collect();
    // Rarest first: ascending frequency, higher id wins frequency ties.
    order.sort_by(|&a, &b| {
        ft.freqs()[a].partial_cmp(&ft.freqs()[b]).unwrap().then(b.cmp(&a))
    });
    let mut targeted = vec![false; dataset.num_labels()];
    for &l in order.iter().take(k_rarest) {
        targeted[l] = true;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<Vec<usize>> = dataset
        .label_sets()
        .iter()
        .map(|set| {
            set.iter()
                .copied()
                .filter(|&l| !targeted[l] || rng.gen::<f64>() >= removal_prob)
                .collect()
        })
        .collect();

    MultiLabelDataset::new(
        dataset.features().to_vec(),
        labels,
        dataset.num_labels(),
        dataset.feature_dim(),
        format!(
            "{} | downsample_rare(k={}, q={}, seed={})",
            dataset.provenance(),
            k_rarest,
            removal_prob,
            seed
        ),
    )
}

/// Splits into train/validation/test by a seeded shuffle and contiguous
/// slices. Ratios must be positive and sum to 1; a slice that would round to
/// zero samples is an error.
pub fn split(
    dataset: &MultiLabelDataset,
    ratios: [f64; 3],
    seed: u64,
) -> Result<(MultiLabelDataset, MultiLabelDataset, MultiLabelDataset)> {
    if ratios.iter().any(|&r| !(r > 0.0) || !r.is_finite()) {
        return Err(Error::InvalidParameter(format!("split ratios must be positive, got {ratios:?}")));
    }
    let total: f64 = ratios.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!("split ratios sum to {total}, expected 1")));
    }
    let m = dataset.num_samples();
    if m == 0 {
        return Err(Error::EmptyDataset);
    }
    let c0 = math::round(ratios[0] * m as f64) as usize;
    let c1 = math::round(ratios[1] * m as f64) as usize;
    if c0 == 0 || c1 == 0 || c0 + c1 >= m {
        return Err(Error::InvalidParameter(format!(
            "split of {m} samples by {ratios:?} leaves an empty slice"
        )));
    }
    let mut order: Vec<usize> = (0..m).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let take = |range: core::ops::Range<usize>, name: &str| -> Result<MultiLabelDataset> {
        let idx = &order[range];
        MultiLabelDataset::new(
            idx.iter().map(|&i| dataset.features()[i].clone()).collect(),
            idx.iter().map(|&i| dataset.label_sets()[i].clone()).collect(),
            dataset.num_labels(),
            dataset.feature_dim(),
            format!("{} | split:{name}(seed={seed})", dataset.provenance()),
        )
    };
    let train = take(0..c0, "train")?;
    let val = take(c0..c0 + c1, "val")?;
    let test = take(c0 + c1..m, "test")?;
    Ok((train, val, test))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_spec() -> SynthSpec {
        SynthSpec {
            num_labels: 12,
            feature_dim: 6,
            num_samples: 400,
            power_exponent: 1.2,
            base_prevalence: 0.5,
            labels_correlated_with_features: true,
            noise_rate: 0.0,
        }
    }

    #[test]
    fn generator_hits_target_counts_exactly_without_noise() {
        let spec = toy_spec();
        let ds = generate_synthetic(&spec, 9).unwrap();
        for l in 0..spec.num_labels {
            let want = (spec.target_prevalence(l) * 400.0).round() as usize;
            assert_eq!(ds.positive_count(l).unwrap(), want, "label {l}");
        }
    }

    #[test]
    fn generator_is_deterministic_per_seed() {
        let spec = toy_spec();
        let a = generate_synthetic(&spec, 4).unwrap();
        let b = generate_synthetic(&spec, 4).unwrap();
        let c = generate_synthetic(&spec, 5).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.label_sets(), c.label_sets());
    }

    #[test]
    fn uncorrelated_labels_ignore_features() {
        let mut spec = toy_spec();
        spec.labels_correlated_with_features = false;
        let ds = generate_synthetic(&spec, 1).unwrap();
        // Prevalence still roughly follows the target even without planting.
        let head = ds.positive_count(0).unwrap() as f64 / 400.0;
        assert!((head - 0.5).abs() < 0.1, "head prevalence {head}");
    }

    #[test]
    fn noise_flips_some_bits() {
        let mut spec = toy_spec();
        spec.noise_rate = 0.25;
        let clean = generate_synthetic(&toy_spec(), 2).unwrap();
        let noisy = generate_synthetic(&spec, 2).unwrap();
        assert_ne!(clean.label_sets(), noisy.label_sets());
    }

    #[test]
    fn split_slices_are_disjoint_and_exhaustive() {
        let ds = generate_synthetic(&toy_spec(), 3).unwrap();
        let (tr, va, te) = split(&ds, [0.8, 0.1, 0.1], 7).unwrap();
        assert_eq!(tr.num_samples(), 320);
        assert_eq!(va.num_samples(), 40);
        assert_eq!(te.num_samples(), 40);
        assert_eq!(tr.num_samples() + va.num_samples() + te.num_samples(), ds.num_samples());
    }

    #[test]
    fn split_rejects_empty_slices() {
        let spec = SynthSpec { num_samples: 5, ..toy_spec() };
        let ds = generate_synthetic(&spec, 3).unwrap();
        assert!(matches!(
            split(&ds, [0.98, 0.01, 0.01], 7),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn downsample_extremes_are_exact() {
        let ds = generate_synthetic(&toy_spec(), 11).unwrap();
        let untouched = downsample_rare(&ds, 3, 0.0, 1).unwrap();
        assert_eq!(untouched.label_sets(), ds.label_sets());
        let removed = downsample_rare(&ds, 3, 1.0, 1).unwrap();
        for l in 9..12 {
            assert_eq!(removed.positive_count(l).unwrap(), 0, "label {l}");
        }
        // Untargeted labels keep every positive.
        for l in 0..9 {
            assert_eq!(removed.positive_count(l).unwrap(), ds.positive_count(l).unwrap());
        }
        assert_eq!(removed.num_samples(), ds.num_samples());
    }

    #[test]
    fn rejects_out_of_range_label_ids() {
        let err = MultiLabelDataset::new(
            vec![vec![0.0, 1.0]],
            vec![vec![3]],
            3,
            2,
            String::from("t"),
        );
        assert_eq!(err.unwrap_err(), Error::LabelOutOfRange { label: 3, num_labels: 3 });
    }
}
