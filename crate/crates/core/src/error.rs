use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The three probe angles produce a (numerically) singular measurement matrix.
    #[error("degenerate probe angles: |det(A)| = {det:e} is not above {threshold:e}")]
    DegenerateAngles { det: f64, threshold: f64 },

    #[error("resource limit exceeded: {requested} grid evaluations requested, cap is {cap}")]
    ResourceLimit { requested: u128, cap: u128 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
