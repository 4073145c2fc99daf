use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_FRAME: i32 = 4;
pub const EXIT_NO_SEPARATION: i32 = 5;
pub const EXIT_NON_MONOTONIC: i32 = 6;
pub const EXIT_MISSING_MIOU: i32 = 7;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Frame(String),
    #[error("no separation found within tau_max={tau_max}")]
    NoSeparation { tau_max: usize },
    #[error("{0}")]
    NonMonotonic(String),
    #[error("{0}")]
    MissingMiou(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io { .. } | CliError::Input(_) => EXIT_IO,
            CliError::Frame(_) => EXIT_FRAME,
            CliError::NoSeparation { .. } => EXIT_NO_SEPARATION,
            CliError::NonMonotonic(_) => EXIT_NON_MONOTONIC,
            CliError::MissingMiou(_) => EXIT_MISSING_MIOU,
        }
    }

    pub fn io(path: impl AsRef<Path>) -> impl FnOnce(io::Error) -> CliError {
        let path = path.as_ref().to_path_buf();
        move |source| CliError::Io { path, source }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
