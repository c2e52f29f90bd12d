use std::fmt;

/// Crate-wide error type. The CLI maps `Parse`/`Validation` to exit code 2
/// and `Numerical` to exit code 3.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Malformed input document.
    Parse(String),
    /// The document parsed but violates a model invariant.
    Validation(String),
    /// A numerical guard tripped: non-convergence, overflow range,
    /// box too small, toppling cap exceeded.
    Numerical(String),
    /// A query asked for something outside the computed region.
    OutOfRange(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        match self {
            Error::Parse(msg) => write!(f, "parse error: {msg}"),
            Error::Validation(msg) => write!(f, "validation error: {msg}"),
            Error::Numerical(msg) => write!(f, "numerical guard: {msg}"),
            Error::OutOfRange(msg) => write!(f, "out of range: {msg}"),
        }
    }
}

impl std::error::Error for Error {}
