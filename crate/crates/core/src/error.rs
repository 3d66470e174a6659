use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad argument or config value: out-of-range parameter, mismatched
    /// lengths, malformed grid, and similar caller mistakes.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A stated requirement is not met (budget pass/fail, threshold checks).
    #[error("requirement not met: {0}")]
    Requirement(String),

    /// A computation cannot proceed on the given data (singular estimate,
    /// missing crossing, empty stream).
    #[error("{0}")]
    Computation(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
