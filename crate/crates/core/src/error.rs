use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("tail model violates the L_sp condition: (p-1)·β = {lhs} must be < p·s = {rhs}")]
    TailViolation { lhs: f64, rhs: f64 },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("unsupported dimension n = {n}: {reason}")]
    UnsupportedDimension { n: usize, reason: &'static str },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("not enough data: {0}")]
    InsufficientData(String),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn pre(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}
