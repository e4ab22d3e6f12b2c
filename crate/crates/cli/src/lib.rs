//! Command-line front end for osc-unwrap: Monte Carlo sweeps, bound
//! tables, lemma verification and single-shot decode traces.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{run, run_with_threads, Fault};
pub use config::{Mode, Overrides, RawConfig, RunConfig};
pub use error::{exit, CliError, CliResult};
