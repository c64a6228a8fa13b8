//! IO, file formats and the command-line front end for `rank2sr-core`.

pub mod batch;
pub mod cli;
pub mod config;
pub mod error;
pub mod library;
pub mod output;
pub mod run;
pub mod stages;
pub mod suites;

pub use error::{CliError, Result};
