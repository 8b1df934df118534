use alloc::string::String;
use core::fmt;

/// Library-wide error type. The three variants map onto the CLI exit codes
/// 1 (bad input), 2 (precision insufficient to decide), 3 (internal bug).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// Malformed or inconsistent input: parse failures, shape mismatches,
    /// inhomogeneous data, unsupported requests.
    Input(String),
    /// The answer is not determined at the working precision. Retry with a
    /// higher `uprec` (or `O(u^N)` bound) rather than trusting a guess.
    Precision(String),
    /// An internal invariant failed. Always a bug in this crate.
    Internal(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }
    pub fn precision(msg: impl Into<String>) -> Self {
        Error::Precision(msg.into())
    }
    pub fn internal(msg: impl Into<String>) -> Self {
        Error::Internal(msg.into())
    }

    /// Exit code the CLI uses for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Input(_) => 1,
            Error::Precision(_) => 2,
            Error::Internal(_) => 3,
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Input(m) => write!(f, "input error: {}", m),
            Error::Precision(m) => write!(f, "precision error: {}", m),
            Error::Internal(m) => write!(f, "internal error: {}", m),
        }
    }
}
