use thiserror::Error;

/// Errors raised by the learners, the environments and the harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("out of sequence: {0}")]
    Sequencing(String),

    #[error("value outside domain: {0}")]
    Domain(String),

    #[error("index out of range: {0}")]
    Index(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("missing audit data: {0}")]
    Audit(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
