//! Configuration, orchestration and output for the `nsf` command-line tool.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod pipeline;

pub use commands::Options;
pub use config::SimConfig;
pub use error::{exit, CliError};
