use std::fmt;

use npsurv_core::Error;

/// A failed command and the exit status it maps to.
#[derive(Debug)]
pub enum Failure {
    /// Bad arguments or input files: exit status 2.
    Usage(String),
    /// A numerical routine or I/O failed: exit status 1.
    Compute(String),
}

impl Failure {
    pub fn usage(msg: impl Into<String>) -> Self {
        Failure::Usage(msg.into())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Compute(_) => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Compute(m) => f.write_str(m),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidInput(_)
            | Error::Parse { .. }
            | Error::NotInContinuation { .. }
            | Error::NotSymmetric
            | Error::Csv(_) => Failure::Usage(e.to_string()),
            _ => Failure::Compute(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Compute(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        if e.is_io() {
            Failure::Compute(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

pub type CmdResult = std::result::Result<(), Failure>;
