//! File formats, experiment configuration and parallel drivers for the
//! repeated sample-splitting test.

pub mod config;
pub mod error;
pub mod experiments;
pub mod io;
pub mod output;
pub mod summary;

pub use config::{ExperimentConfig, Mode, SCHEMA_VERSION};
pub use error::CliError;
