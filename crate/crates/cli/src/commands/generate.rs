//! `generate`: write synthetic train/val/test sparse files plus a manifest.

use serde::{Deserialize, Serialize};
use tailgame_core::data::{MultiLabelDataset, SynthSpec};

use super::{materialize_splits, write_json, CommandContext};
use crate::config::DataSource;
use crate::error::{CliError, Result};
use crate::sparse::save_sparse;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerLabelCounts {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub spec: SynthSpec,
    pub split_sizes: SplitSizes,
    pub per_label_counts: PerLabelCounts,
}

fn label_counts(dataset: &MultiLabelDataset) -> Vec<usize> {
    (0..dataset.num_labels())
        .map(|l| dataset.positive_count(l).expect("label id within range"))
        .collect()
}

pub fn run(ctx: &CommandContext) -> Result<()> {
    let spec = match &ctx.config.data {
        DataSource::Synthetic(spec) => spec.clone(),
        DataSource::Sparse(_) => {
            return Err(CliError::Input(
                "generate needs a synthetic data source, this config points at sparse files".into(),
            ))
        }
    };
    let splits = materialize_splits(&ctx.config, ctx.seed)?;
    let dir = ctx.ensure_out_dir()?;

    save_sparse(&splits.train, &dir.join("train.txt"))?;
    save_sparse(&splits.val, &dir.join("val.txt"))?;
    save_sparse(&splits.test, &dir.join("test.txt"))?;

    let manifest = Manifest {
        seed: ctx.seed,
        spec,
        split_sizes: SplitSizes {
            train: splits.train.num_samples(),
            val: splits.val.num_samples(),
            test: splits.test.num_samples(),
        },
        per_label_counts: PerLabelCounts {
            train: label_counts(&splits.train),
            val: label_counts(&splits.val),
            test: label_counts(&splits.test),
        },
    };
    write_json(&manifest, &dir.join("manifest.json"))?;

    println!(
        "wrote {} train / {} val / {} test samples to {}",
        manifest.split_sizes.train,
        manifest.split_sizes.val,
        manifest.split_sizes.test,
        dir.display()
    );
    Ok(())
}
