use thiserror::Error;

/// Errors produced by factorization, baselines and the regression pipeline.
#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numeric failure: {0}")]
    NumericFailure(String),

    #[error("unsupported dimension {dim}: harmonic expansion requires d >= 3")]
    UnsupportedDimension { dim: usize },

    #[error("kernel evaluation returned a non-finite value at r = {r}")]
    InvalidKernel { r: f64 },

    #[error("tolerance {requested:e} unreachable; best achievable Chebyshev tail is {best_tail:e} at degree {degree}")]
    ToleranceUnreachable {
        requested: f64,
        best_tail: f64,
        degree: usize,
    },

    #[error("{what} of size {size} exceeds the cap of {cap}")]
    SizeCap {
        what: &'static str,
        size: usize,
        cap: usize,
    },

    #[error("factorization rank {rank} needs {entries} stored entries, above the budget of {budget}")]
    RankBudget {
        rank: usize,
        entries: usize,
        budget: usize,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::NumericFailure(msg.into())
    }
}
