//! `eval`: score a checkpoint on a sparse dataset.

use std::path::Path;

use serde::{Deserialize, Serialize};
use tailgame_core::fusion::FusionContext;
use tailgame_core::label_space::{compute_frequencies, split_head_tail};
use tailgame_core::metrics::{specialization_ranks, MetricReport, SpecializationReport};
use tailgame_core::training::evaluate_players;

use super::{to_pretty_json, write_json, CommandContext};
use crate::checkpoint::Checkpoint;
use crate::error::{CliError, Result};
use crate::sparse::load_sparse;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metrics: MetricReport,
    pub specialization: SpecializationReport,
}

pub fn run(ctx: &CommandContext, checkpoint_path: &Path, data_path: &Path) -> Result<()> {
    let checkpoint = Checkpoint::load(checkpoint_path)?;
    let dataset = load_sparse(data_path)?;
    if dataset.feature_dim() != checkpoint.feature_dim
        || dataset.num_labels() != checkpoint.num_labels()
    {
        return Err(CliError::Input(format!(
            "checkpoint expects {} features over {} labels, data has {} over {}",
            checkpoint.feature_dim,
            checkpoint.num_labels(),
            dataset.feature_dim(),
            dataset.num_labels()
        )));
    }

    let options = &ctx.config.train;
    let fusion = FusionContext::new(&checkpoint.partition, &options.fusion)?;
    let table = compute_frequencies(&dataset)?;
    let rare = split_head_tail(&table, &options.metrics.rare_split)?;
    let y = dataset.label_rows();

    let metrics = evaluate_players(
        &checkpoint.players,
        &fusion,
        dataset.features(),
        &y,
        rare.tail(),
        &options.metrics.ks,
    )?;
    let specialization = specialization_ranks(
        &checkpoint.players,
        dataset.features(),
        &y,
        &rare,
        &options.fusion.thresholds,
    )?;
    let report = EvalReport { metrics, specialization };

    println!("{}", to_pretty_json(&report)?);
    if ctx.out_dir.is_some() {
        let dir = ctx.ensure_out_dir()?;
        write_json(&report, &dir.join("eval.json"))?;
    }
    Ok(())
}
