use thiserror::Error;

/// Errors raised by the decomposition library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("empty sample set")]
    EmptySamples,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("signal too short: need at least {required} samples, got {actual}")]
    TooShort { required: usize, actual: usize },

    #[error("hermite order {0} exceeds the factorial range of f64")]
    OrderOverflow(usize),

    #[error("integration diverged at step {step}")]
    Integration { step: usize },

    #[error("numerical failure at sample {sample}, mode {mode}: {reason}")]
    Numerical {
        sample: usize,
        mode: usize,
        reason: String,
    },

    #[error("{0}")]
    Domain(String),
}

impl Error {
    pub(crate) fn param(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
