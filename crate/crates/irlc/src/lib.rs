//! Std companion of `irlc-core`: experiment configuration, file formats and
//! the `irlc` command-line driver.

pub mod commands;
pub mod config;
pub mod error;
pub mod format;

pub use error::{CliError, CliResult};
