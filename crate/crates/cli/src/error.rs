use std::fmt;
use std::process::ExitCode;

use mtlu_core::Error;

/// A command failure together with the process exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments, bad config, unreadable or unwritable files.
    Usage(String),
    /// A check or validation did not pass.
    Check(String),
    /// Training or inference produced non-finite values.
    Numeric(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Check(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Numeric(_) => 3,
        })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Check(m) | CliError::Numeric(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Io(_)
            | Error::Checkpoint(_)
            | Error::MalformedImage { .. }
            | Error::UnsupportedImage(_) => CliError::Usage(msg),
            Error::NonFinite(_) => CliError::Numeric(msg),
            _ => CliError::Check(msg),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Attaches a path to an I/O-class error.
pub fn with_path<T>(r: mtlu_core::Result<T>, path: &std::path::Path) -> CliResult<T> {
    r.map_err(|e| match CliError::from(e) {
        CliError::Usage(m) => CliError::Usage(format!("{}: {m}", path.display())),
        other => other,
    })
}
