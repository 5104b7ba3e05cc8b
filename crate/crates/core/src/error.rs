use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("marginals are not in convex order: {0}")]
    ConvexOrder(String),

    #[error("linear program is {0}")]
    Lp(String),

    #[error("size guard exceeded: {0}")]
    SizeGuard(String),

    #[error("degenerate step: {0}")]
    Degenerate(String),

    #[error("no exchange chain: {0}")]
    NoChain(String),

    /// A certified invariant failed at runtime. Always a defect.
    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
