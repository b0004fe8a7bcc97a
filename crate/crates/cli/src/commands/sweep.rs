//! `sweep`: train across a list of values for one hyperparameter.
//!
//! Each value runs once per configured seed and is scored on the test split
//! with per-label thresholds tuned on validation data. A value that fails
//! (for example `n_players` above the label count) marks its row with the
//! error and leaves the other rows untouched.

use std::fs;

use serde::{Deserialize, Serialize};
use tailgame_core::training::{train, tuned_test_metrics};

use super::{materialize_splits, mean, write_json, CommandContext};
use crate::config::SweepParameter;
use crate::error::{io_error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRun {
    pub seed: u64,
    pub rare_f1: f64,
    pub micro_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub mean_rare_f1: Option<f64>,
    pub mean_micro_f1: Option<f64>,
    pub runs: Vec<SweepRun>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub parameter: String,
    pub seeds: Vec<u64>,
    pub rows: Vec<SweepRow>,
}

fn run_value(
    ctx: &CommandContext,
    parameter: SweepParameter,
    value: f64,
    seeds: &[u64],
) -> Result<Vec<SweepRun>> {
    let mut runs = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let splits = materialize_splits(&ctx.config, seed)?;
        let mut config = ctx.config.train.clone();
        config.seed = seed;
        parameter.apply(&mut config, value)?;
        let outcome = train(&splits.train, &splits.val, &config)?;
        let report = tuned_test_metrics(&outcome, &config, &splits.val, &splits.test)?;
        runs.push(SweepRun { seed, rare_f1: report.rare_f1, micro_f1: report.micro_f1 });
    }
    Ok(runs)
}

pub fn execute(
    ctx: &CommandContext,
    parameter: SweepParameter,
    values: &[f64],
    seeds: &[u64],
) -> SweepReport {
    let rows = values
        .iter()
        .map(|&value| match run_value(ctx, parameter, value, seeds) {
            Ok(runs) => {
                let rares: Vec<f64> = runs.iter().map(|r| r.rare_f1).collect();
                let micros: Vec<f64> = runs.iter().map(|r| r.micro_f1).collect();
                SweepRow {
                    value,
                    mean_rare_f1: Some(mean(&rares)),
                    mean_micro_f1: Some(mean(&micros)),
                    runs,
                    error: None,
                }
            }
            Err(err) => SweepRow {
                value,
                mean_rare_f1: None,
                mean_micro_f1: None,
                runs: Vec::new(),
                error: Some(err.to_string()),
            },
        })
        .collect();
    SweepReport { parameter: parameter.name().into(), seeds: seeds.to_vec(), rows }
}

fn to_csv(report: &SweepReport) -> String {
    let mut out = String::from("parameter,value,seed,rare_f1,micro_f1,error\n");
    for row in &report.rows {
        if let Some(err) = &row.error {
            let quoted = err.replace('"', "\"\"");
            out.push_str(&format!("{},{},,,,\"{quoted}\"\n", report.parameter, row.value));
            continue;
        }
        for run in &row.runs {
            out.push_str(&format!(
                "{},{},{},{},{},\n",
                report.parameter, row.value, run.seed, run.rare_f1, run.micro_f1
            ));
        }
    }
    out
}

pub fn run(ctx: &CommandContext, parameter: SweepParameter, values: &[f64]) -> Result<()> {
    let seeds = ctx.config.experiment_seeds(ctx.seed);
    let report = execute(ctx, parameter, values, &seeds);

    let dir = ctx.ensure_out_dir()?;
    write_json(&report, &dir.join("sweep.json"))?;
    let csv_path = dir.join("sweep.csv");
    fs::write(&csv_path, to_csv(&report)).map_err(|e| io_error(&csv_path, e))?;

    println!("{:<12} {:>14} {:>14}", report.parameter, "mean_rare_f1", "mean_micro_f1");
    for row in &report.rows {
        match (&row.error, row.mean_rare_f1, row.mean_micro_f1) {
            (None, Some(rare), Some(micro)) => {
                println!("{:<12} {:>14.4} {:>14.4}", row.value, rare, micro);
            }
            _ => println!(
                "{:<12} error: {}",
                row.value,
                row.error.as_deref().unwrap_or("unknown")
            ),
        }
    }
    Ok(())
}
