use std::io;

use thiserror::Error;

use crate::training::LossRecord;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("gradient error: {0}")]
    Gradient(String),

    #[error("field ids do not match: {0}")]
    IdMismatch(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("training diverged at step {step}: {reason}")]
    Divergence {
        step: u64,
        reason: String,
        last_finite: Option<Box<LossRecord>>,
    },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
}
