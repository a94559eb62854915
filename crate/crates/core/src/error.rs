use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    Dimension(String),

    /// A singular value that must be inverted later is zero (or below the
    /// relative rank threshold).
    #[error("degenerate channel for user {user}: {reason}")]
    DegenerateChannel { user: usize, reason: String },

    #[error("singular matrix in {context}")]
    SingularMatrix { context: &'static str },

    #[error("SINR undefined for symbol {symbol}: zero denominator")]
    UndefinedSinr { symbol: usize },

    #[error("SUSINR is infinite for zero noise power")]
    InfiniteSusinr,

    #[error("precoding matrix is identically zero")]
    ZeroPrecoder,

    #[error("numerical failure at iteration {iteration}: {reason}")]
    Numerical { iteration: usize, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("channel file format error at byte {offset}: {reason}")]
    Format { offset: u64, reason: String },

    #[error("I/O error on {path}: {source}")]
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
