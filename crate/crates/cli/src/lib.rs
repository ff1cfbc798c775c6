//! Experiment runner around the `wavesense` core: JSON configuration, CSV
//! and PGM outputs with a sha256 manifest, and the five pipeline commands.

use std::path::{Path, PathBuf};

pub mod commands;
pub mod config;
pub mod formats;
pub mod manifest;

pub use commands::{Command, Context};
pub use config::Config;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config line {line}, column {column}: {message}")]
    Config { line: usize, column: usize, message: String },
    #[error(transparent)]
    Core(#[from] wavesense::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("format: {0}")]
    Format(String),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }
}
