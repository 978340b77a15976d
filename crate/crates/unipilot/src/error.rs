//! Crate-wide error type with CLI exit-code classes.

use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid configuration or command-line usage.
    #[error("config: {0}")]
    Config(String),

    /// Filesystem failure.
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed input file contents.
    #[error("{path}:{line}: {msg}")]
    Format {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    /// Checkpoint cannot be used as requested.
    #[error("checkpoint: {0}")]
    Checkpoint(String),

    /// Operation called outside its domain.
    #[error("invalid: {0}")]
    Invalid(String),
}

impl Error {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }

    pub fn format(path: &Path, line: usize, msg: String) -> Self {
        Self::Format { path: path.to_path_buf(), line, msg }
    }

    /// Process exit code: 2 config, 3 I/O, 4 contract violations
    /// (malformed files, checkpoint mismatches, domain errors).
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Io { .. } => 3,
            Self::Format { .. } | Self::Checkpoint(_) | Self::Invalid(_) => 4,
        }
    }
}
