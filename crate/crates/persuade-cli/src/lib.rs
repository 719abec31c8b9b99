//! Experiment harness around `persuade-core`: JSON experiment configs,
//! CSV/JSONL artifact formats, the run manifest, and the subcommand
//! implementations behind the `persuade` binary.
//!
//! Every output is a pure function of the config and its master seed —
//! no wall-clock seeding, no timestamps, atomic file writes — so a rerun
//! reproduces every artifact byte for byte.

pub mod commands;
pub mod config;
pub mod error;
pub mod formats;
pub mod manifest;

pub use config::{ExperimentConfig, ValidatedExperiment};
pub use error::CliError;
