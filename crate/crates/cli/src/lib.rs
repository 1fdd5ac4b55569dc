//! The `uapg` command-line tool.

pub mod args;
mod commands;
pub mod config;
pub mod error;
pub mod media;
mod timing;

pub use args::Cli;
pub use commands::{run, REPORT_FILE};
pub use error::{exit, CliError};
