use std::path::PathBuf;

use thiserror::Error;

use crate::model::CdnId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("no throughput samples for pan-CDN {0}")]
    NoData(CdnId),

    #[error("trace for pan-CDN {cdn} exhausted at t={at_s:.3}s (trace covers {len_s}s)")]
    TraceExhausted { cdn: CdnId, at_s: f64, len_s: usize },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("config key `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("infeasible strategy: {0}")]
    Infeasible(String),

    #[error("{path}: {msg}")]
    Io { path: PathBuf, msg: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, err: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            msg: err.to_string(),
        }
    }

    /// Errors caused by bad input data (files, configs), as opposed to
    /// strategy failures.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::Infeasible(_))
    }
}
