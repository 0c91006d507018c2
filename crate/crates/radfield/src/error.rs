//! Failure kinds of the command line and their exit codes.

use std::path::{Path, PathBuf};

use radfield_core::codec::DecodeError;
use radfield_core::dosimetry::DosimetryError;

use crate::formats::FormatError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Format {
        path: PathBuf,
        #[source]
        source: FormatError,
    },
    #[error("{}: {source}", path.display())]
    Decode {
        path: PathBuf,
        #[source]
        source: DecodeError,
    },
    #[error(transparent)]
    Dosimetry(#[from] DosimetryError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("photon budget exhausted after {primaries} primaries: field epsilon {achieved} above threshold {threshold}")]
    BudgetExhausted {
        primaries: u64,
        achieved: f64,
        threshold: f64,
    },
}

impl Error {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => EXIT_IO,
            Error::Decode {
                source: DecodeError::Source(_),
                ..
            } => EXIT_IO,
            Error::BudgetExhausted { .. } => EXIT_BUDGET,
            _ => EXIT_CONFIG,
        }
    }

    /// Stable prefix printed in front of the message.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Usage(_) => "E_USAGE",
            Error::Config(_) => "E_CONFIG",
            Error::Format { .. } => "E_PARSE",
            Error::Decode { source, .. } => match source {
                DecodeError::ChecksumMismatch { .. } => "E_CHECKSUM",
                DecodeError::Truncated(_) => "E_TRUNCATED",
                DecodeError::NotFound { .. } => "E_NOT_FOUND",
                DecodeError::Source(_) => "E_IO",
                _ => "E_FORMAT",
            },
            Error::Dosimetry(e) => match e {
                DosimetryError::OutOfBounds { .. } => "E_BOUNDS",
                DosimetryError::MissingChannel(_) | DosimetryError::MissingLayer { .. } => {
                    "E_NOT_FOUND"
                }
                _ => "E_DOSIMETRY",
            },
            Error::Io { .. } => "E_IO",
            Error::BudgetExhausted { .. } => "E_BUDGET",
        }
    }

    /// The single line written to standard error.
    pub fn report(&self) -> String {
        let msg = self.to_string().replace(['\n', '\r'], " ");
        format!("{}: {}", self.code(), msg)
    }
}
