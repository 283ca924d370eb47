//! Command-line front end for `risbeam`: dataset generation, solving,
//! training, sweeps and timing.

pub mod args;
pub mod commands;
pub mod error;

pub use commands::Checkpoints;
pub use error::{CliError, CliResult};
