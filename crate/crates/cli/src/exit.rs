//! Process exit codes.

use std::fmt;

use precip_sr::Error;

pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_IO: u8 = 3;
pub const EXIT_DIVERGENCE: u8 = 4;
pub const EXIT_MISMATCH: u8 = 5;
pub const EXIT_ID_MISMATCH: u8 = 6;

/// Marks an error with an explicit exit code, overriding the default mapping.
/// It displays as nothing so it can be dropped from printed messages.
#[derive(Debug, Clone, Copy)]
pub struct Coded(pub u8);

impl fmt::Display for Coded {
    fn fmt(&self, _f: &mut fmt::Formatter<'_>) -> fmt::Result {
        Ok(())
    }
}

impl std::error::Error for Coded {}

pub fn with_code(code: u8) -> impl FnOnce(anyhow::Error) -> anyhow::Error {
    move |e| e.context(Coded(code))
}

fn core_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidArgument(_) | Error::Format(_) => EXIT_CONFIG,
        Error::Io(_) => EXIT_IO,
        Error::Divergence { .. } => EXIT_DIVERGENCE,
        Error::Shape { .. } => EXIT_MISMATCH,
        Error::IdMismatch(_) => EXIT_ID_MISMATCH,
        Error::Gradient(_) => EXIT_FAILURE,
    }
}

/// Exit code for `err`: the outermost [`Coded`] marker, else a mapping of
/// the underlying library or IO error.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(c) = err.downcast_ref::<Coded>() {
        return c.0;
    }
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return core_code(e);
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return EXIT_IO;
        }
    }
    EXIT_FAILURE
}
