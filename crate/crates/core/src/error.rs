use thiserror::Error;

use crate::game::Seat;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported size: {0}")]
    UnsupportedSize(String),

    #[error("protocol violation at stage {stage} (seat {seat}): {reason}")]
    ProtocolViolation {
        /// 1-based stage index.
        stage: usize,
        seat: Seat,
        reason: String,
    },

    #[error("no Pareto-optimal Nash equilibrium for joint type ({0}, {1})")]
    NoPone(usize, usize),

    #[error("invalid population: {0}")]
    InvalidPopulation(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed dataset: {0}")]
    Dataset(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
