use std::fmt;
use std::process::ExitCode;

/// Failure class of a command, mapped to the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad flags, missing files, unusable settings.
    Config,
    /// Input files that exist but cannot be used.
    Data,
    /// Anything else (I/O at runtime, service failures).
    Runtime,
}

impl ErrorKind {
    pub fn exit_code(self) -> u8 {
        match self {
            Self::Runtime => 1,
            Self::Config => 2,
            Self::Data => 3,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ErrorKind,
    pub source: anyhow::Error,
}

impl CliError {
    pub fn config(e: impl Into<anyhow::Error>) -> Self {
        Self { kind: ErrorKind::Config, source: e.into() }
    }

    pub fn data(e: impl Into<anyhow::Error>) -> Self {
        Self { kind: ErrorKind::Data, source: e.into() }
    }

    pub fn runtime(e: impl Into<anyhow::Error>) -> Self {
        Self { kind: ErrorKind::Runtime, source: e.into() }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.kind.exit_code())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.source)
    }
}

impl From<toposieve::Error> for CliError {
    fn from(e: toposieve::Error) -> Self {
        use toposieve::Error as E;
        match e {
            E::InvalidSplit(_) => Self::config(e),
            E::Io(_) => Self::runtime(e),
            _ => Self::data(e),
        }
    }
}

/// Attach context to a fallible result and classify it.
pub trait Classify<T> {
    fn config_err(self, what: impl fmt::Display) -> Result<T, CliError>;
    fn data_err(self, what: impl fmt::Display) -> Result<T, CliError>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn config_err(self, what: impl fmt::Display) -> Result<T, CliError> {
        self.map_err(|e| CliError::config(e.into().context(what.to_string())))
    }

    fn data_err(self, what: impl fmt::Display) -> Result<T, CliError> {
        self.map_err(|e| CliError::data(e.into().context(what.to_string())))
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;
