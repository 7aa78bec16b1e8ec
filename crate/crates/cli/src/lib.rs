//! Command-line driver for `curriculum-lab`.

pub mod commands;
pub mod config;
pub mod error;
pub mod suite;

pub use error::{CliError, EXIT_FAILURE, EXIT_PASS, EXIT_USAGE};
