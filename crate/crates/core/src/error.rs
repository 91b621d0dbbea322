//! Crate-wide error type.

use std::fmt;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug)]
pub enum Error {
    /// I/O failure while reading or writing a file.
    Io { path: String, source: std::io::Error },
    /// A table failed to load (ragged row, duplicate id, bad header, ...).
    Load { path: String, message: String },
    /// An attribute id was referenced but does not exist in the table.
    UnknownAttribute { table: String, attr: String },
    /// An attribute match references attributes missing from either side.
    DanglingMatch { attr: String, side: &'static str },
    /// Expression text failed to parse; `pos` is a byte offset into the input.
    Parse { pos: usize, message: String },
    /// An expression could not be evaluated against the given table.
    Eval { message: String },
    /// A fit or explainer precondition was not met.
    Fit { message: String },
    /// Configuration file problem (unknown key, bad value).
    Config { message: String },
    /// Benchmark script problem.
    Script { line: usize, message: String },
    /// Anything else.
    Other { message: String },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Io { path, source } => write!(f, "io error on {path}: {source}"),
            Error::Load { path, message } => write!(f, "failed to load {path}: {message}"),
            Error::UnknownAttribute { table, attr } => {
                write!(f, "unknown attribute {attr:?} in table {table:?}")
            }
            Error::DanglingMatch { attr, side } => {
                write!(f, "attribute match references {attr:?} missing from the {side} table")
            }
            Error::Parse { pos, message } => write!(f, "parse error at byte {pos}: {message}"),
            Error::Eval { message } => write!(f, "evaluation error: {message}"),
            Error::Fit { message } => write!(f, "fit error: {message}"),
            Error::Config { message } => write!(f, "config error: {message}"),
            Error::Script { line, message } => write!(f, "script error on line {line}: {message}"),
            Error::Other { message } => write!(f, "{message}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}

impl Error {
    pub fn other(message: impl Into<String>) -> Self {
        Error::Other { message: message.into() }
    }

    pub fn eval(message: impl Into<String>) -> Self {
        Error::Eval { message: message.into() }
    }

    pub fn fit(message: impl Into<String>) -> Self {
        Error::Fit { message: message.into() }
    }
}
