use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("malformed model string `{input}`: {reason}")]
    MalformedModel { input: String, reason: String },

    #[error("parameter `{field}` out of range: {reason}")]
    ParameterOutOfRange { field: &'static str, reason: String },

    #[error("empty profile")]
    EmptyProfile,

    #[error("unsupported size n = {n}: {reason}")]
    UnsupportedSize { n: u64, reason: String },

    #[error("operation `{op}` is not available for model `{model}`: {reason}")]
    UnsupportedModel {
        op: &'static str,
        model: String,
        reason: String,
    },

    #[error("invalid argument `{field}`: {reason}")]
    InvalidArgument { field: &'static str, reason: String },

    #[error("series error: {0}")]
    Series(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("resource budget exceeded: {0}")]
    Budget(String),

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn unsupported(op: &'static str, model: impl ToString, reason: impl Into<String>) -> Self {
        Error::UnsupportedModel {
            op,
            model: model.to_string(),
            reason: reason.into(),
        }
    }

    pub(crate) fn size(n: u64, reason: impl Into<String>) -> Self {
        Error::UnsupportedSize {
            n,
            reason: reason.into(),
        }
    }

    pub(crate) fn arg(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            field,
            reason: reason.into(),
        }
    }
}
