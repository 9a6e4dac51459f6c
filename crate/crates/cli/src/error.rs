use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Error, Debug)]
pub enum CliError {
    /// Bad flags, missing inputs or invalid configuration.
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Data {
        path: PathBuf,
        source: videodna_core::Error,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] videodna_core::Error),
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError::Usage(message.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            _ => 2,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Attaches a file path to core and I/O errors.
pub trait WithPath<T> {
    fn at(self, path: &Path) -> CliResult<T>;
}

impl<T> WithPath<T> for videodna_core::Result<T> {
    fn at(self, path: &Path) -> CliResult<T> {
        self.map_err(|source| match source {
            videodna_core::Error::Io(source) => CliError::Io {
                path: path.to_path_buf(),
                source,
            },
            source => CliError::Data {
                path: path.to_path_buf(),
                source,
            },
        })
    }
}

impl<T> WithPath<T> for std::io::Result<T> {
    fn at(self, path: &Path) -> CliResult<T> {
        self.map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}
