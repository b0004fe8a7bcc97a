//! Randomized invariant checks for the core pipeline.

use proptest::prelude::*;

use tailgame_core::data::{generate_synthetic, split, SynthSpec};
use tailgame_core::fusion::{
    fuse, threshold, FusionSpec, FusionStrategy, FusionWeights, Thresholds,
};
use tailgame_core::label_space::{
    partition_labels, split_head_tail, FrequencyTable, SplitRule,
};
use tailgame_core::player::PlayerOutput;
use tailgame_core::rewards::{
    disagreement, surrogate_score, SurrogateKind, SurrogateSpec,
};
use tailgame_core::{bernoulli_kl, sigmoid};

fn freq_table() -> impl Strategy<Value = FrequencyTable> {
    prop::collection::vec(0.0..=1.0f64, 1..40)
        .prop_map(|freqs| FrequencyTable::from_frequencies(freqs, 100).unwrap())
}

fn partition_inputs() -> impl Strategy<Value = (FrequencyTable, usize, f64)> {
    freq_table().prop_flat_map(|table| {
        let labels = table.num_labels();
        (Just(table), 1..=labels, 0.0..0.999f64)
    })
}

proptest! {
    #[test]
    fn partitions_always_satisfy_their_laws((table, n, rho) in partition_inputs()) {
        let partition = partition_labels(&table, n, rho).unwrap();
        partition.validate().unwrap();
        // Every label is covered at least once and cores exactly once.
        let counts = partition.cover_counts();
        prop_assert!(counts.iter().all(|&c| c >= 1));
        let mut core_seen = vec![0usize; table.num_labels()];
        for core in partition.cores() {
            for &l in core {
                core_seen[l] += 1;
            }
        }
        prop_assert!(core_seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn weighted_average_fusion_stays_inside_the_hull(
        (table, n, rho) in partition_inputs(),
        seed in 0u64..1000,
    ) {
        let partition = partition_labels(&table, n, rho).unwrap();
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let outputs: Vec<PlayerOutput> = partition
            .blocks()
            .iter()
            .enumerate()
            .map(|(id, block)| PlayerOutput {
                player_id: id,
                probs: block.iter().map(|_| rng.gen_range(0.0..=1.0)).collect(),
            })
            .collect();
        for strategy in [FusionStrategy::WeightedAverage, FusionStrategy::MaxPool] {
            let spec = FusionSpec { strategy, ..FusionSpec::default() };
            let fused = fuse(&outputs, &partition, &spec).unwrap();
            prop_assert_eq!(fused.len(), table.num_labels());
            for (l, &q) in fused.iter().enumerate() {
                let covering: Vec<f64> = partition
                    .blocks()
                    .iter()
                    .enumerate()
                    .flat_map(|(p, block)| {
                        block
                            .iter()
                            .position(|&b| b == l)
                            .map(|row| outputs[p].probs[row])
                    })
                    .collect();
                let lo = covering.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = covering.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(q >= lo - 1e-12 && q <= hi + 1e-12);
                if strategy == FusionStrategy::MaxPool {
                    prop_assert_eq!(q, hi);
                }
            }
        }
    }

    #[test]
    fn bernoulli_kl_is_nonnegative(p in 1e-6..=0.999999f64, q in 1e-6..=0.999999f64) {
        prop_assert!(bernoulli_kl(p, q) >= -1e-12);
        prop_assert!(bernoulli_kl(p, p).abs() < 1e-12);
    }

    #[test]
    fn sigmoid_is_bounded_and_monotone(a in -40.0..40.0f64, b in -40.0..40.0f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (sl, sh) = (sigmoid(lo), sigmoid(hi));
        prop_assert!((0.0..=1.0).contains(&sl) && (0.0..=1.0).contains(&sh));
        prop_assert!(sl <= sh);
    }

    #[test]
    fn rarity_weights_fall_with_frequency(table in freq_table()) {
        let weights = table.rarity_weights();
        for (l, &w) in weights.iter().enumerate() {
            prop_assert!(w > 0.5 - 1e-12 && w <= 1.0);
            for (k, &v) in weights.iter().enumerate() {
                if table.freqs()[l] <= table.freqs()[k] {
                    prop_assert!(w >= v - 1e-12);
                }
            }
        }
    }

    #[test]
    fn surrogates_respect_their_bounds(
        rows in (1usize..8).prop_flat_map(|width| prop::collection::vec(
            prop::collection::vec((0.001..=0.999f64, any::<bool>()), width..=width),
            1..8,
        )),
    ) {
        let probs: Vec<Vec<f64>> =
            rows.iter().map(|r| r.iter().map(|c| c.0).collect()).collect();
        let y: Vec<Vec<bool>> =
            rows.iter().map(|r| r.iter().map(|c| c.1).collect()).collect();
        let soft = surrogate_score(&probs, &y, &SurrogateSpec::new(SurrogateKind::SoftF1)).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&soft));
        let bce = surrogate_score(&probs, &y, &SurrogateSpec::new(SurrogateKind::NegBce)).unwrap();
        prop_assert!(bce <= 1e-12);
    }

    #[test]
    fn thresholding_is_strict(p in 0.0..=1.0f64, tau in 0.01..=0.99f64) {
        let out = threshold(&[p, tau], &Thresholds::Global(tau)).unwrap();
        prop_assert_eq!(out[0], p > tau);
        prop_assert!(!out[1], "p == tau must not fire");
    }

    #[test]
    fn head_and_tail_partition_the_labels(
        table in freq_table(),
        fraction in 0.05..=0.95f64,
        by_count in any::<bool>(),
    ) {
        let rule = if by_count {
            SplitRule::CountFraction(fraction)
        } else {
            SplitRule::CumulativeMass(fraction)
        };
        let split = split_head_tail(&table, &rule).unwrap();
        let labels = table.num_labels();
        prop_assert_eq!(split.head().len() + split.tail().len(), labels);
        for l in 0..labels {
            let in_head = split.head().contains(&l);
            let in_tail = split.tail().contains(&l);
            prop_assert!(in_head != in_tail);
            prop_assert_eq!(split.is_tail(l), in_tail);
        }
        if by_count {
            let expect = ((fraction * labels as f64).ceil() as usize).min(labels);
            prop_assert_eq!(split.tail().len(), expect);
        }
    }

    #[test]
    fn disagreement_is_nonnegative_and_zero_on_agreement(
        (table, n, rho) in partition_inputs(),
        p in 0.05..=0.95f64,
    ) {
        let partition = partition_labels(&table, n, rho).unwrap();
        let outputs: Vec<PlayerOutput> = partition
            .blocks()
            .iter()
            .enumerate()
            .map(|(id, block)| PlayerOutput { player_id: id, probs: vec![p; block.len()] })
            .collect();
        for i in 0..n {
            prop_assert!(disagreement(i, &outputs, &partition).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn dataset_splits_are_disjoint_and_exhaustive(
        seed in 0u64..500,
        first in 0.2..0.7f64,
    ) {
        let spec = SynthSpec {
            num_labels: 5,
            feature_dim: 3,
            num_samples: 60,
            power_exponent: 1.0,
            base_prevalence: 0.6,
            labels_correlated_with_features: false,
            noise_rate: 0.0,
        };
        let data = generate_synthetic(&spec, seed).unwrap();
        let rest = (1.0 - first) / 2.0;
        let (a, b, c) = split(&data, [first, rest, rest], seed).unwrap();
        prop_assert_eq!(a.num_samples() + b.num_samples() + c.num_samples(), 60);
        prop_assert!(a.num_samples() > 0 && b.num_samples() > 0 && c.num_samples() > 0);
    }
}
