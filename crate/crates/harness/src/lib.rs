//! Run loop, sweeps, log files and analysis commands behind the `sfplus` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod presets;
pub mod runlog;
pub mod runner;
pub mod sweep;

pub use config::RunConfig;
pub use error::{HarnessError, Result};
pub use runner::{execute, run_to_dir, RunOptions, RunOutcome};
