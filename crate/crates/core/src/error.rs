use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("space mismatch: expected {expected}, found {found}")]
    SpaceMismatch { expected: String, found: String },

    #[error("marginal mismatch: {0}")]
    MarginalMismatch(String),

    #[error("infeasible decision for parameter {x:?}: {reason}")]
    Infeasible { x: Vec<f64>, reason: String },

    #[error("oracle failure at agent {agent}: {reason}")]
    Oracle { agent: usize, reason: String },

    #[error("conjugate of f is not available for this problem")]
    ConjugateUnavailable,

    #[error("solver aborted at iteration {iteration}: {source}")]
    Aborted {
        iteration: usize,
        source: Box<Error>,
        /// Records and iterate up to the failure.
        partial: Box<crate::solvers::SolveReport>,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error at `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
