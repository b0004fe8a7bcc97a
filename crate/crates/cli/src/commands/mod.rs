//! Command implementations behind the CLI verbs.

pub mod ablate;
pub mod eval;
pub mod generate;
pub mod inspect;
pub mod sweep;
pub mod train;

use std::fs;
use std::path::{Path, PathBuf};

use tailgame_core::data::{downsample_rare, generate_synthetic, split, MultiLabelDataset};

use crate::config::{load_config, DataSource, RunConfig};
use crate::error::{io_error, CliError, Result};
use crate::sparse::load_sparse;

/// A parsed config with the seed and output directory flags resolved.
pub struct CommandContext {
    pub config: RunConfig,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
}

impl CommandContext {
    pub fn resolve(
        config_path: &Path,
        seed_flag: Option<u64>,
        out_flag: Option<PathBuf>,
    ) -> Result<Self> {
        let config = load_config(config_path)?;
        let seed = config.resolve_seed(seed_flag);
        let out_dir = out_flag.or_else(|| config.out_dir.clone());
        Ok(Self { config, seed, out_dir })
    }

    /// The output directory, created on demand. Errors when neither `--out`
    /// nor `out_dir` was given.
    pub fn ensure_out_dir(&self) -> Result<&Path> {
        let dir = self.out_dir.as_deref().ok_or_else(|| {
            CliError::Input("no output directory; pass --out or set out_dir".into())
        })?;
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        Ok(dir)
    }
}

// Distinct seed streams per randomized stage, so the dataset draw, the
// shuffle behind the split, and the downsampling never share one.
const GENERATE_STREAM: u64 = 1;
const SPLIT_STREAM: u64 = 2;
const DOWNSAMPLE_STREAM: u64 = 3;

fn seed_stream(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub struct Splits {
    pub train: MultiLabelDataset,
    pub val: MultiLabelDataset,
    pub test: MultiLabelDataset,
}

/// Builds the three splits from the configured source; `generate` and
/// `train` share this path, so training on a synthetic source sees exactly
/// the files `generate` would write. Downsampling touches the training
/// split only.
pub fn materialize_splits(config: &RunConfig, seed: u64) -> Result<Splits> {
    let (train, val, test) = match &config.data {
        DataSource::Synthetic(spec) => {
            let dataset = generate_synthetic(spec, seed_stream(seed, GENERATE_STREAM))?;
            split(&dataset, config.split_ratios, seed_stream(seed, SPLIT_STREAM))?
        }
        DataSource::Sparse(paths) => {
            (load_sparse(&paths.train)?, load_sparse(&paths.val)?, load_sparse(&paths.test)?)
        }
    };
    let train = match &config.downsample {
        Some(ds) => downsample_rare(
            &train,
            ds.k_rarest,
            ds.removal_fraction,
            seed_stream(seed, DOWNSAMPLE_STREAM),
        )?,
        None => train,
    };
    Ok(Splits { train, val, test })
}

/// Writes pretty JSON with a trailing newline.
pub fn write_json<T: serde::Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_error(path, e))
}

pub fn to_pretty_json<T: serde::Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| CliError::Input(format!("serialization: {e}")))
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population standard deviation; 0 for a single value.
fn std_dev(values: &[f64]) -> f64 {
    let mu = mean(values);
    (values.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / values.len() as f64).sqrt()
}
