use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the toolkit can report. Variants group into the three
/// process exit categories used by the CLI (see [`Error::exit_code`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("capacity exhausted: {0}")]
    Capacity(String),

    #[error("insufficient source `{source_name}`: need {needed} records, have {available}")]
    InsufficientSource {
        source_name: String,
        needed: usize,
        available: usize,
    },

    #[error("unsatisfiable: {0}")]
    Unsatisfiable(String),

    #[error("ambiguous: {0}")]
    Ambiguous(String),

    #[error("malformed program: {0}")]
    MalformedProgram(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("vocabulary: {0}")]
    Vocabulary(String),

    #[error("parse error at token {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("{path}, line {line}: {message}")]
    Schema {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Short machine-readable tag for the error JSON emitted by the CLI.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Capacity(_) => "capacity",
            Error::InsufficientSource { .. } => "insufficient_source",
            Error::Unsatisfiable(_) => "unsatisfiable",
            Error::Ambiguous(_) => "ambiguous",
            Error::MalformedProgram(_) => "malformed_program",
            Error::Dimension(_) => "dimension",
            Error::Vocabulary(_) => "vocabulary",
            Error::Parse { .. } => "parse",
            Error::Schema { .. } => "schema",
            Error::Input(_) => "input",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
        }
    }

    /// 2 for data errors, 3 for capacity/exhaustion. Usage errors (1) are
    /// raised by the argument parser before any of these can occur.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Capacity(_) | Error::InsufficientSource { .. } | Error::Unsatisfiable(_) => 3,
            _ => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
