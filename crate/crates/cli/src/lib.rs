//! Command-line front end for the operator-discovery toolkit: configuration
//! parsing, dataset and report serialization, and the benchmark harness.

pub mod config;
pub mod error;
pub mod io;
pub mod run;

pub use config::RunConfig;
pub use error::{CliError, Result};
