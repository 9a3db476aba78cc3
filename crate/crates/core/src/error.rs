use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{path}: {malformed} of {total} lines are malformed (first problem: {first})")]
    TooManyMalformed {
        path: PathBuf,
        malformed: usize,
        total: usize,
        first: String,
    },

    #[error("{path}: {total} unknown location id(s), first offenders: {}", .ids.join(", "))]
    UnknownLocations {
        path: PathBuf,
        ids: Vec<String>,
        total: usize,
    },

    #[error("{0}")]
    Invalid(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("leakage: {0}")]
    Leakage(String),

    #[error("non-finite objective at iteration {iteration} (J = {value}); try a smaller learning rate")]
    NonFinite { iteration: usize, value: f64 },

    #[error("missing artifact {path}; run `geoembed {producer}` first")]
    MissingArtifact { path: PathBuf, producer: String },

    #[error("artifact {path} was produced with config hash {found}, current config hash is {expected}")]
    HashMismatch {
        path: PathBuf,
        expected: String,
        found: String,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }

    /// Process exit code for the command-line front end.
    ///
    /// 2 is a validation failure, 3 a missing upstream artifact, 1 anything
    /// else (I/O).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 1,
            Error::MissingArtifact { .. } => 3,
            _ => 2,
        }
    }
}
