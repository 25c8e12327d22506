//! Command-line runner for Lagrangian flow matching experiments.
//!
//! A run directory holds `config.json` (the resolved [`RunConfig`]),
//! `checkpoint.bin`, `train_log.csv`, `eval.csv`/`eval.json` and `plots/`.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod error;
pub mod plot;
pub mod tables;

pub use checkpoint::{Checkpoint, CheckpointHeader};
pub use config::{RunConfig, SweepAxis, SweepSpec};
pub use error::{CliError, Result};
