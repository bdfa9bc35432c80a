use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A bound family was requested for a variable that does not satisfy its
    /// moment or symmetry requirements.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Exhaustive enumeration would visit more candidates than allowed.
    #[error("search space of {candidates} assignments exceeds the limit of {limit}; use the relaxed selector")]
    SizeGuard { candidates: f64, limit: u64 },

    #[error("internal consistency error: {0}")]
    Consistency(String),

    #[error("invalid scenario: {0}")]
    Scenario(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}
