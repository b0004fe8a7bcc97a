//! `inspect-partition`: print the label partition a config would train with.

use serde::{Deserialize, Serialize};
use tailgame_core::label_space::{compute_frequencies, partition_labels};

use super::{materialize_splits, to_pretty_json, write_json, CommandContext};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionReport {
    pub n_players: usize,
    pub rho: f64,
    pub num_labels: usize,
    /// Training-split frequency per label id.
    pub frequencies: Vec<f64>,
    pub rarity_weights: Vec<f64>,
    /// Label blocks in frequency-rank order, one per player.
    pub blocks: Vec<Vec<usize>>,
    pub cores: Vec<Vec<usize>>,
    pub overlaps: Vec<Vec<usize>>,
    /// How many players cover each label id.
    pub cover_counts: Vec<usize>,
}

pub fn run(ctx: &CommandContext) -> Result<()> {
    let splits = materialize_splits(&ctx.config, ctx.seed)?;
    let table = compute_frequencies(&splits.train)?;
    let options = &ctx.config.train;
    let partition = partition_labels(&table, options.n_players, options.rho)?;

    let report = PartitionReport {
        n_players: partition.n_players(),
        rho: partition.rho(),
        num_labels: partition.num_labels(),
        frequencies: table.freqs().to_vec(),
        rarity_weights: table.rarity_weights(),
        blocks: partition.blocks().to_vec(),
        cores: partition.cores().to_vec(),
        overlaps: partition.overlaps().to_vec(),
        cover_counts: partition.cover_counts(),
    };

    println!("{}", to_pretty_json(&report)?);
    if ctx.out_dir.is_some() {
        let dir = ctx.ensure_out_dir()?;
        write_json(&report, &dir.join("partition.json"))?;
    }
    Ok(())
}
