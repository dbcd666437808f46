use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Sequence lengths or index ranges that do not fit together.
    #[error("size error: {0}")]
    Size(String),

    /// Inconsistent component configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Folded data that cannot be unfolded under the given parameters.
    #[error("recovery failed: {0}")]
    Recovery(String),

    #[error("strategy `{strategy}`: {source}")]
    Strategy {
        strategy: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn size(msg: impl Into<String>) -> Self {
        Error::Size(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn recovery(msg: impl Into<String>) -> Self {
        Error::Recovery(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
