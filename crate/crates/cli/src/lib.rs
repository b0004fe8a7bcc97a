//! Experiment CLI for cooperative long-tail multi-label training.
//!
//! The binary front-end (`tailgame`) wires the `tailgame-core` library to
//! files and processes: JSON run configuration, a sparse text dataset format,
//! versioned JSON checkpoints, JSON-lines diagnostics, and the experiment
//! commands `generate`, `train`, `eval`, `ablate`, `sweep`, and
//! `inspect-partition`.
//!
//! Everything here is deterministic given (config, seed): repeated runs
//! produce byte-identical data files, checkpoints, and reports.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod error;
pub mod sparse;
