use std::fmt::Display;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, missing inputs or an invalid configuration.
    #[error("{0}")]
    Usage(String),
    /// The command finished but some items failed.
    #[error("{0}")]
    Partial(String),
    #[error("{0}")]
    Fatal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) => 1,
            Self::Partial(_) => 2,
            Self::Fatal(_) => 3,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn usage(msg: impl Display) -> CliError {
    CliError::Usage(msg.to_string())
}

pub fn fatal(msg: impl Display) -> CliError {
    CliError::Fatal(msg.to_string())
}

/// Malformed input files are the caller's to fix; I/O failures are not.
pub fn input(path: &std::path::Path, e: labelsteward::dataset::DatasetError) -> CliError {
    let msg = format!("{}: {e}", path.display());
    match e {
        labelsteward::dataset::DatasetError::Io(_) => CliError::Fatal(msg),
        _ => CliError::Usage(msg),
    }
}
