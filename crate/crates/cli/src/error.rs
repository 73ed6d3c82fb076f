use std::path::PathBuf;

use thiserror::Error;

/// Failures surfaced by the command line, each with its own exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config {path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error("invalid configuration: {0}")]
    Invalid(String),

    #[error("file not found: {0}")]
    MissingFile(PathBuf),

    #[error(transparent)]
    Core(#[from] emobench::Error),

    #[error("{0}")]
    Other(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
/// Unknown flag or malformed command line.
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_MISSING_FILE: i32 = 4;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Invalid(_) => EXIT_CONFIG,
            CliError::MissingFile(_) => EXIT_MISSING_FILE,
            CliError::Core(emobench::Error::Io { source, .. }) if source.kind() == std::io::ErrorKind::NotFound => {
                EXIT_MISSING_FILE
            }
            CliError::Core(_) | CliError::Other(_) => EXIT_FAILURE,
        }
    }
}

/// Fails with [`CliError::MissingFile`] unless `path` exists.
pub fn require_file(path: &std::path::Path) -> CliResult<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::MissingFile(path.to_path_buf()))
    }
}
