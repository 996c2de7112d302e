#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Experiment driver: configuration, subcommand orchestration and
//! deterministic run summaries.

pub mod config;
pub mod error;
pub mod run;
pub mod summary;

pub use config::{parse_config, Command, ConfigError, RunConfig};
pub use error::CliError;
pub use run::run;
pub use summary::{ExitStatus, RunSummary};
