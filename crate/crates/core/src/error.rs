use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed lattice text.
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },

    /// Well-formed text describing an invalid word graph.
    #[error("invalid lattice structure: {0}")]
    Structure(String),

    #[error("no finite path from source to sink")]
    NoFinitePath,

    #[error("word graph has not been normalized")]
    NotNormalized,

    #[error("lattice has at least {count} paths, more than the cap of {cap}")]
    TooManyPaths { count: u128, cap: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no lattice could be indexed ({} failures)", .failures.len())]
    NoLattices { failures: Vec<(PathBuf, String)> },

    #[error("unsupported index format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("corrupt index file: {0}")]
    Corrupt(String),

    #[error("AP undefined: no relevant (query, region) pair")]
    ApUndefined,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
