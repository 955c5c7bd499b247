use madiff_core::Error;

pub const USAGE: u8 = 2;
pub const RUNTIME: u8 = 3;

/// An error with the process exit code it maps to.
#[derive(Debug)]
pub struct Fail {
    pub code: u8,
    pub error: anyhow::Error,
}

pub type CliResult<T> = std::result::Result<T, Fail>;

impl Fail {
    pub fn usage(msg: impl std::fmt::Display) -> Self {
        Self {
            code: USAGE,
            error: anyhow::anyhow!("{msg}"),
        }
    }
}

/// Numerical breakdowns are runtime failures; bad inputs of any kind,
/// including unreadable or unwritable paths, are usage errors.
fn code_for(e: &Error) -> u8 {
    match e {
        Error::MissingCode(_) | Error::Degenerate(_) => RUNTIME,
        _ => USAGE,
    }
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Self {
            code: code_for(&e),
            error: e.into(),
        }
    }
}

impl From<anyhow::Error> for Fail {
    fn from(error: anyhow::Error) -> Self {
        let code = error.downcast_ref::<Error>().map_or(USAGE, code_for);
        Self { code, error }
    }
}
