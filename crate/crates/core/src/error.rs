use thiserror::Error;

/// Failure modes shared by every module.
///
/// `Validation` and `Domain` describe bad inputs; `IllConditioned` and
/// `Undersampled` are numerical refusals where the inputs are fine but the
/// requested tolerance or resolution cannot be honoured.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("ill-conditioned: {0}")]
    IllConditioned(String),
    #[error("undersampled: {0}")]
    Undersampled(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for failures caused by conditioning or sampling rather than by
    /// malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::IllConditioned(_) | Error::Undersampled(_) | Error::Internal(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
