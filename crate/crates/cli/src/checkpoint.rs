//! Versioned JSON checkpoints.
//!
//! Layout: `{format_version, partition, feature_dim, players}` with each
//! player as `{id, label_block, weights, bias}`. Floats serialize in
//! shortest round-trip decimal, so load(save(x)) reproduces every parameter
//! bit for bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use tailgame_core::label_space::Partition;
use tailgame_core::player::PlayerModel;

use crate::error::{io_error, CliError, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format_version: u32,
    pub partition: Partition,
    pub feature_dim: usize,
    pub players: Vec<PlayerModel>,
}

impl Checkpoint {
    pub fn new(partition: Partition, feature_dim: usize, players: Vec<PlayerModel>) -> Self {
        Self { format_version: FORMAT_VERSION, partition, feature_dim, players }
    }

    pub fn num_labels(&self) -> usize {
        self.partition.num_labels()
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(CliError::Input(format!(
                "checkpoint format version {} (this build reads {FORMAT_VERSION})",
                self.format_version
            )));
        }
        self.partition.validate()?;
        if self.players.len() != self.partition.n_players() {
            return Err(CliError::Input(format!(
                "{} players for a {}-block partition",
                self.players.len(),
                self.partition.n_players()
            )));
        }
        for (i, player) in self.players.iter().enumerate() {
            player.validate(self.feature_dim)?;
            if player.id != i {
                return Err(CliError::Input(format!("player at index {i} has id {}", player.id)));
            }
            if player.label_block != self.partition.blocks()[i] {
                return Err(CliError::Input(format!(
                    "player {i} label block does not match the partition"
                )));
            }
            if !player.params_finite() {
                return Err(CliError::Input(format!("player {i} has non-finite parameters")));
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Input(format!("checkpoint serialization: {e}")))?;
        text.push('\n');
        fs::write(path, text).map_err(|e| io_error(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        let checkpoint: Checkpoint = serde_json::from_str(&text)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        checkpoint.validate()?;
        Ok(checkpoint)
    }
}
