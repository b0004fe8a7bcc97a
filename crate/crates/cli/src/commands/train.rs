//! `train`: run the best-response loop, write checkpoint, diagnostics, and
//! test metrics.

use std::fs;
use std::path::Path;

use tailgame_core::diagnostics::trace_summary;
use tailgame_core::fusion::FusionContext;
use tailgame_core::label_space::split_head_tail;
use tailgame_core::metrics::MetricReport;
use tailgame_core::training::{evaluate_players, train, TrainConfig, TrainOutcome};

use super::{write_json, CommandContext, Splits};
use crate::checkpoint::Checkpoint;
use crate::error::{io_error, CliError, Result};

pub struct TrainedRun {
    pub outcome: TrainOutcome,
    pub test_report: MetricReport,
}

/// Trains on the given splits and evaluates the test split. The rare tail
/// for Rare-F1 is cut from training-split frequencies.
pub fn execute(splits: &Splits, config: &TrainConfig) -> Result<TrainedRun> {
    let outcome = train(&splits.train, &splits.val, config)?;
    let fusion = FusionContext::new(&outcome.partition, &config.fusion)?;
    let rare = split_head_tail(&outcome.frequencies, &config.metrics.rare_split)?;
    let test_report = evaluate_players(
        &outcome.players,
        &fusion,
        splits.test.features(),
        &splits.test.label_rows(),
        rare.tail(),
        &config.metrics.ks,
    )?;
    Ok(TrainedRun { outcome, test_report })
}

fn write_diagnostics(run: &TrainedRun, dir: &Path) -> Result<()> {
    let path = dir.join("diagnostics.jsonl");
    let mut lines = String::new();
    for epoch in &run.outcome.diagnostics {
        let line = serde_json::to_string(epoch)
            .map_err(|e| CliError::Input(format!("diagnostics serialization: {e}")))?;
        lines.push_str(&line);
        lines.push('\n');
    }
    fs::write(&path, lines).map_err(|e| io_error(&path, e))?;

    if run.outcome.diagnostics.len() >= 2 {
        let summary = trace_summary(&run.outcome.diagnostics)?;
        write_json(&summary, &dir.join("trace_summary.json"))?;
    }
    Ok(())
}

pub fn run(ctx: &CommandContext) -> Result<()> {
    let splits = super::materialize_splits(&ctx.config, ctx.seed)?;
    let mut config = ctx.config.train.clone();
    config.seed = ctx.seed;

    let run = execute(&splits, &config)?;
    let dir = ctx.ensure_out_dir()?;

    let feature_dim = splits.train.feature_dim();
    let checkpoint = Checkpoint::new(
        run.outcome.partition.clone(),
        feature_dim,
        run.outcome.players.clone(),
    );
    checkpoint.save(&dir.join("checkpoint.json"))?;
    write_diagnostics(&run, dir)?;
    write_json(&run.test_report, &dir.join("metrics.json"))?;

    println!("rare_f1 {}", run.test_report.rare_f1);
    println!("micro_f1 {}", run.test_report.micro_f1);
    Ok(())
}
