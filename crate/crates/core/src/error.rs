//! The error type shared by every module.

use alloc::string::String;
use core::fmt;

/// Every fallible operation of the crate reports one of these.
///
/// The variants group failures by *who* is at fault, which is what the
/// command-line front end needs to pick an exit code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// Malformed query or dependency text (1-based line and column).
    Parse { line: usize, column: usize, message: String },
    /// A dependency or atom that does not fit the declared relations.
    Schema(String),
    /// An operation was called with arguments it does not accept.
    Usage(String),
    /// A structural requirement on a query or hypergraph failed
    /// (e.g. asking for a head-path of a cyclic query).
    Structure(String),
    /// Input data breaks a documented precondition (e.g. violates an FD).
    Precondition(String),
    /// The request is well-formed but outside what the algorithms support.
    Unsupported(String),
    /// An internal consistency check failed; this indicates a bug.
    Internal(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Parse { line, column, message } => {
                write!(f, "parse error at {line}:{column}: {message}")
            }
            Error::Schema(m) => write!(f, "schema error: {m}"),
            Error::Usage(m) => write!(f, "usage error: {m}"),
            Error::Structure(m) => write!(f, "structure error: {m}"),
            Error::Precondition(m) => write!(f, "precondition failed: {m}"),
            Error::Unsupported(m) => write!(f, "unsupported: {m}"),
            Error::Internal(m) => write!(f, "internal consistency error: {m}"),
        }
    }
}

impl core::error::Error for Error {}

/// Shorthand used throughout the crate: `bail!(Kind, "fmt", args..)`.
macro_rules! bail {
    ($kind:ident, $($arg:tt)*) => {
        return Err($crate::error::Error::$kind(alloc::format!($($arg)*)))
    };
}
pub(crate) use bail;
