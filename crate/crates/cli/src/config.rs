//! JSON run configuration.
//!
//! One config file drives every command. Unknown keys are rejected wherever
//! they appear, so a typo fails fast with the offending key named.
//!
//! ```json
//! {
//!   "data": { "synthetic": { "num_labels": 50, "feature_dim": 20,
//!     "num_samples": 2500, "power_exponent": 1.5, "base_prevalence": 0.6,
//!     "labels_correlated_with_features": true, "noise_rate": 0.0 } },
//!   "split_ratios": [0.8, 0.1, 0.1],
//!   "train": { "n_players": 3, "rho": 0.2, "epochs": 40 },
//!   "out_dir": "runs/reference",
//!   "seed": 7,
//!   "seeds": [0, 1, 2, 3, 4]
//! }
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tailgame_core::data::SynthSpec;
use tailgame_core::training::TrainConfig;

use crate::error::{io_error, CliError, Result};

/// Where the train/val/test splits come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    /// Generate from a synthetic spec, then split by `split_ratios`.
    Synthetic(SynthSpec),
    /// Load pre-materialized sparse files.
    Sparse(SparsePaths),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SparsePaths {
    pub train: PathBuf,
    pub val: PathBuf,
    pub test: PathBuf,
}

/// Rare-positive removal applied to the training split only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DownsampleSpec {
    /// How many of the rarest labels to target.
    pub k_rarest: usize,
    /// Per-occurrence removal probability.
    pub removal_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSource,
    /// Train/val/test fractions for splitting a synthetic dataset.
    #[serde(default = "default_split_ratios")]
    pub split_ratios: [f64; 3],
    #[serde(default)]
    pub downsample: Option<DownsampleSpec>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// Run seed; `--seed` overrides it, and `train.seed` is the fallback.
    #[serde(default)]
    pub seed: Option<u64>,
    /// Seeds for the repeated runs of `ablate` and `sweep`.
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
}

fn default_split_ratios() -> [f64; 3] {
    [0.8, 0.1, 0.1]
}

impl RunConfig {
    /// Seed precedence: `--seed` flag, then `seed`, then `train.seed`.
    pub fn resolve_seed(&self, flag: Option<u64>) -> u64 {
        flag.or(self.seed).unwrap_or(self.train.seed)
    }

    /// Seeds for repeated experiment runs; defaults to the single run seed.
    pub fn experiment_seeds(&self, run_seed: u64) -> Vec<u64> {
        match &self.seeds {
            Some(s) if !s.is_empty() => s.clone(),
            _ => vec![run_seed],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(ds) = &self.downsample {
            if !(ds.removal_fraction >= 0.0 && ds.removal_fraction <= 1.0) {
                return Err(CliError::Input(format!(
                    "downsample.removal_fraction must be in [0, 1], got {}",
                    ds.removal_fraction
                )));
            }
        }
        Ok(())
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let config: RunConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    config.validate()?;
    Ok(config)
}

/// Which hyperparameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum SweepParameter {
    Alpha,
    NPlayers,
    Beta,
    Rho,
}

impl SweepParameter {
    pub fn name(&self) -> &'static str {
        match self {
            SweepParameter::Alpha => "alpha",
            SweepParameter::NPlayers => "n_players",
            SweepParameter::Beta => "beta",
            SweepParameter::Rho => "rho",
        }
    }

    /// Rewrites one training config field to `value`.
    pub fn apply(&self, config: &mut TrainConfig, value: f64) -> Result<()> {
        match self {
            SweepParameter::Alpha => config.curiosity.alpha = value,
            SweepParameter::Beta => config.curiosity.beta = value,
            SweepParameter::Rho => config.rho = value,
            SweepParameter::NPlayers => {
                if !value.is_finite() || value < 1.0 || value.fract() != 0.0 {
                    return Err(CliError::Input(format!(
                        "n_players value {value} is not a positive integer"
                    )));
                }
                config.n_players = value as usize;
            }
        }
        Ok(())
    }
}
