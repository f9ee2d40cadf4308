//! Staged command-line pipeline around `qfactors-core`: corpus ingestion, feature
//! extraction, latent factorization, classifier training and evaluation, and reports.

pub mod artifacts;
pub mod cli;
pub mod config;
pub mod error;
pub mod pipeline;
pub mod report;
pub mod tables;

pub use config::PipelineConfig;
pub use error::{CliError, CliResult};
pub use pipeline::Pipeline;
