//! Error and warning types shared across the crate.

use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: file is not valid UTF-8")]
    NotUtf8 { path: PathBuf },

    /// Empty lines are rejected rather than skipped so that sentence ids
    /// stay aligned with externally produced loss records.
    #[error("{path}: empty sentence at line {line}")]
    EmptySentence { path: PathBuf, line: usize },

    #[error("{path}: line {line}: {message}")]
    CorpusFormat {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("record {index} (sentence {sentence_id}, position {position}, token {token:?}): loss {loss} is negative or not finite")]
    InvalidLoss {
        index: usize,
        sentence_id: usize,
        position: usize,
        token: String,
        loss: f64,
    },

    #[error("line {line}: {message}")]
    RecordFormat { line: usize, message: String },

    #[error("{path}: line {line}: {message}")]
    EmbeddingFormat {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("context windows differ in length: {left} vs {right}")]
    WindowLengthMismatch { left: usize, right: usize },

    #[error("similarity of empty context windows is undefined")]
    EmptyWindow,

    #[error("position {position} out of range for sentence of length {len}")]
    PositionOutOfRange { position: usize, len: usize },

    #[error("occurrence references unknown sentence id {sentence_id}")]
    UnknownSentenceId { sentence_id: usize },

    #[error("bitext sides are misaligned: {left} vs {right} sentences")]
    MisalignedBitext { left: usize, right: usize },

    #[error("{0}")]
    EmptyInput(String),

    #[error("{0}")]
    InvalidArgument(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn empty_input(what: impl Into<String>) -> Self {
        Error::EmptyInput(what.into())
    }

    pub(crate) fn invalid_argument(what: impl Into<String>) -> Self {
        Error::InvalidArgument(what.into())
    }
}

/// Non-fatal diagnostics produced by sampling and mixing operations.
///
/// Warnings are part of the deterministic result of an operation but are
/// *not* written into data outputs; callers route them to a diagnostic
/// stream so downstream pipelines can consume output files blindly.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Warning {
    /// Fewer eligible sentences existed than were requested; the result
    /// contains every eligible sentence.
    Exhausted { requested: usize, available: usize },
    /// The synthetic bitext was smaller than the ratio required; all of it
    /// was used.
    SyntheticShort { requested: usize, available: usize },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::Exhausted {
                requested,
                available,
            } => write!(
                f,
                "eligibility exhausted: requested {requested} sentences, only {available} available"
            ),
            Warning::SyntheticShort {
                requested,
                available,
            } => write!(
                f,
                "synthetic bitext too small: ratio requires {requested} pairs, only {available} available"
            ),
        }
    }
}
