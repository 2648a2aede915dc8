use std::io;
use std::path::PathBuf;

use thiserror::Error;
use xml_ridge::Error as CoreError;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_DATA: i32 = 4;
pub const EXIT_NUMERIC: i32 = 5;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },

    #[error("{}: {source}", path.display())]
    Data { path: PathBuf, source: CoreError },

    #[error("invalid config file {}: {message}", path.display())]
    Config { path: PathBuf, message: String },

    #[error(transparent)]
    Core(#[from] CoreError),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    /// Attaches `path` to a core error raised while reading that file.
    pub fn at(path: impl Into<PathBuf>, source: CoreError) -> Self {
        let path = path.into();
        match source {
            CoreError::Io(source) => CliError::Io { path, source },
            source => CliError::Data { path, source },
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config { .. } => EXIT_USAGE,
            CliError::Io { .. } => EXIT_IO,
            CliError::Data { source, .. } | CliError::Core(source) => core_code(source),
        }
    }
}

fn core_code(e: &CoreError) -> i32 {
    match e {
        CoreError::Io(_) => EXIT_IO,
        CoreError::Parse { .. } | CoreError::Format(_) | CoreError::DimensionMismatch { .. } => EXIT_DATA,
        CoreError::Singular { .. } | CoreError::Capacity { .. } => EXIT_NUMERIC,
        CoreError::InvalidArgument(_) => EXIT_USAGE,
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
