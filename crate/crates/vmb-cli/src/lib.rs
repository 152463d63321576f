//! Configuration, file formats and run orchestration for the `vmb` solvers.

pub mod cache;
pub mod config;
pub mod output;
pub mod run;
pub mod snapshot;

use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: format error: {msg}")]
    Format { path: PathBuf, msg: String },
    #[error("{context}: {source}")]
    Module {
        context: String,
        #[source]
        source: vmb::Error,
    },
    #[error("check failed: {0}")]
    CheckFailed(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Attach a module/operation label to a core error.
pub trait Context<T> {
    fn ctx(self, context: &str) -> CliResult<T>;
}

impl<T> Context<T> for vmb::Result<T> {
    fn ctx(self, context: &str) -> CliResult<T> {
        self.map_err(|source| CliError::Module { context: context.to_string(), source })
    }
}

pub fn io_error(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}
