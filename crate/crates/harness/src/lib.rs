//! Experiment orchestration for the `shsm-core` simulator: configuration
//! files, SNR sweeps, CDFs, TASS comparisons and CSV output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod experiment;
pub mod output;
pub mod stats;

pub use config::{parse_config, parse_str, ConfigError, ExperimentSpec};
pub use experiment::{run_cdf, run_compare, run_sweep, ResultRecord, RunError};
