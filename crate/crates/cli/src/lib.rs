//! Configuration, experiment presets and report rendering for the `durdet`
//! command-line tool.

pub mod commands;
pub mod config;
pub mod error;
pub mod experiments;
pub mod ingest;
pub mod output;
pub mod presets;

pub use config::{ConfigSources, ExperimentConfig};
pub use error::{CliError, CliResult};
pub use output::Artifact;
