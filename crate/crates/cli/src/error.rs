//! Errors tagged with the process exit code they map to.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    /// Bad flags, unreadable config, unwritable output.
    User = 1,
    /// Input files that cannot be parsed or used.
    Data = 2,
    /// A bug.
    Internal = 3,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ExitKind,
    pub error: anyhow::Error,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

impl CliError {
    pub fn user(msg: impl fmt::Display) -> Self {
        CliError { kind: ExitKind::User, error: anyhow::anyhow!("{msg}") }
    }

    pub fn data(msg: impl fmt::Display) -> Self {
        CliError { kind: ExitKind::Data, error: anyhow::anyhow!("{msg}") }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Tags any error with an exit kind and a context line.
pub trait Tag<T> {
    fn user(self, context: impl fmt::Display) -> CliResult<T>;
    fn data(self, context: impl fmt::Display) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> Tag<T> for Result<T, E> {
    fn user(self, context: impl fmt::Display) -> CliResult<T> {
        self.map_err(|e| CliError { kind: ExitKind::User, error: e.into().context(context.to_string()) })
    }

    fn data(self, context: impl fmt::Display) -> CliResult<T> {
        self.map_err(|e| CliError { kind: ExitKind::Data, error: e.into().context(context.to_string()) })
    }
}
