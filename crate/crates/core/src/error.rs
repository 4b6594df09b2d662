use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EciError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("agent population is empty")]
    EmptyPopulation,

    #[error("no pushes recorded for any agent")]
    NoData,

    #[error("graph has no items")]
    EmptyGraph,

    #[error("{count} files exceeds the exhaustive oracle limit of {limit}")]
    TooLarge { count: usize, limit: usize },

    #[error("file {0} has no unit vector")]
    MissingVector(u64),
}

pub type Result<T> = std::result::Result<T, EciError>;

pub(crate) fn invalid(msg: impl Into<String>) -> EciError {
    EciError::InvalidArgument(msg.into())
}
