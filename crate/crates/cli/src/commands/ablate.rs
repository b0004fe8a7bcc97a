//! `ablate`: compare full training against the no-curiosity and
//! single-predictor variants over the configured seeds. Every variant is
//! scored on the test split with per-label thresholds tuned on validation
//! data.

use serde::{Deserialize, Serialize};
use tailgame_core::label_space::compute_frequencies;
use tailgame_core::training::{ablation_run, variant_config, AblationVariant, TrainConfig};

use super::{materialize_splits, mean, std_dev, write_json, CommandContext};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub map: f64,
    pub micro_f1: f64,
    pub rare_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantRow {
    pub variant: String,
    /// The training config this variant actually ran with.
    pub config: TrainConfig,
    pub map_mean: f64,
    pub map_std: f64,
    pub micro_f1_mean: f64,
    pub micro_f1_std: f64,
    pub rare_f1_mean: f64,
    pub rare_f1_std: f64,
    pub runs: Vec<SeedResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub seeds: Vec<u64>,
    pub rows: Vec<VariantRow>,
}

/// Runs all three variants over `seeds`; each seed draws its own data and
/// its own initialization, so the spread covers both sources of noise.
pub fn execute(ctx: &CommandContext, seeds: &[u64]) -> Result<AblationReport> {
    let mut per_variant: Vec<Vec<SeedResult>> = vec![Vec::new(); AblationVariant::ALL.len()];
    for &seed in seeds {
        let splits = materialize_splits(&ctx.config, seed)?;
        let mut base = ctx.config.train.clone();
        base.seed = seed;
        for (v, &variant) in AblationVariant::ALL.iter().enumerate() {
            let run = ablation_run(&splits.train, &splits.val, &splits.test, &base, variant)?;
            per_variant[v].push(SeedResult {
                seed,
                map: run.test_metrics.map,
                micro_f1: run.test_metrics.micro_f1,
                rare_f1: run.test_metrics.rare_f1,
            });
        }
    }

    // Echo each variant's effective config; the frequency table only
    // matters for the single-predictor payoff reweighting.
    let echo_splits = materialize_splits(&ctx.config, ctx.seed)?;
    let table = compute_frequencies(&echo_splits.train)?;
    let mut base = ctx.config.train.clone();
    base.seed = ctx.seed;

    let rows = AblationVariant::ALL
        .iter()
        .enumerate()
        .map(|(v, &variant)| {
            let runs = per_variant[v].clone();
            let maps: Vec<f64> = runs.iter().map(|r| r.map).collect();
            let micros: Vec<f64> = runs.iter().map(|r| r.micro_f1).collect();
            let rares: Vec<f64> = runs.iter().map(|r| r.rare_f1).collect();
            VariantRow {
                variant: variant.name().into(),
                config: variant_config(&base, variant, &table),
                map_mean: mean(&maps),
                map_std: std_dev(&maps),
                micro_f1_mean: mean(&micros),
                micro_f1_std: std_dev(&micros),
                rare_f1_mean: mean(&rares),
                rare_f1_std: std_dev(&rares),
                runs,
            }
        })
        .collect();
    Ok(AblationReport { seeds: seeds.to_vec(), rows })
}

pub fn run(ctx: &CommandContext) -> Result<()> {
    let seeds = ctx.config.experiment_seeds(ctx.seed);
    let report = execute(ctx, &seeds)?;

    let dir = ctx.ensure_out_dir()?;
    write_json(&report, &dir.join("ablation.json"))?;

    println!("{:<18} {:>16} {:>16} {:>16}", "variant", "map", "micro_f1", "rare_f1");
    for row in &report.rows {
        println!(
            "{:<18} {:>7.4}\u{b1}{:<8.4} {:>7.4}\u{b1}{:<8.4} {:>7.4}\u{b1}{:<8.4}",
            row.variant,
            row.map_mean,
            row.map_std,
            row.micro_f1_mean,
            row.micro_f1_std,
            row.rare_f1_mean,
            row.rare_f1_std
        );
    }
    Ok(())
}
