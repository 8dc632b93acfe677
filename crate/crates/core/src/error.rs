use thiserror::Error;

/// Errors produced across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside the domain where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// Requested dimensions overflow the addressable entry count.
    #[error("size error: {rows} x {cols} entries cannot be allocated")]
    Size { rows: usize, cols: usize },

    /// Vector and matrix shapes disagree.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// The Gram matrix of the selected columns is singular (or numerically so).
    #[error("rank deficiency: Gram matrix of {columns} selected columns is not positive definite")]
    RankDeficient { columns: usize },

    /// The homotopy path hit a degenerate active set.
    #[error("degenerate homotopy path at gamma = {gamma:e}: {reason}")]
    Degenerate { gamma: f64, reason: String },

    #[error("statistical validation could not run: {0}")]
    Validation(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Wraps an I/O failure with the path it concerns.
    pub(crate) fn at(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> Self + '_ {
        move |e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    }

    /// True for errors caused by the file system, serialization or malformed files.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_) | Error::Csv(_) | Error::Json(_) | Error::Parse(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
