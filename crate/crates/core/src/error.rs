//! Crate-wide error type.

use std::fmt;
use std::io;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by field construction, code selection, matrix builds,
/// decoding, and simulation.
#[derive(Debug)]
pub enum Error {
    /// The requested field order is composite.
    NotPrime { q: u64 },
    /// The requested field order exceeds the supported cap of 2^31 - 1.
    FieldTooLarge { q: u64 },
    /// Multiplicative inverse of zero.
    DivisionByZero,
    /// Message length does not match the code dimension.
    BadMessageLength { expected: usize, got: usize },
    /// An item or message index lies outside its valid range.
    IndexOutOfRange { index: u64, bound: u64 },
    /// The requested parameters admit no valid code.
    Infeasible { reason: String },
    /// More items requested than the code has codewords.
    TooManyItems { n_items: u64, capacity: u64 },
    /// Random-design density outside its valid range.
    BadDensity { reason: String },
    /// Stacked parts disagree on the number of columns.
    WidthMismatch { expected: usize, got: usize },
    /// Measurement length does not match the matrix row count.
    LengthMismatch { expected: usize, got: usize },
    /// Noise probability outside (0, 0.5) or an invalid threshold slack.
    BadNoise { reason: String },
    /// Brute-force enumeration would exceed the oracle guard.
    TooLarge { reason: String },
    /// Invalid defective-set or stacking size.
    BadSize { reason: String },
    /// Malformed matrix or scheme file.
    Format { reason: String },
    /// Underlying I/O failure.
    Io(io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::NotPrime { q } => write!(f, "{} is not prime", q),
            Error::FieldTooLarge { q } => {
                write!(f, "field order {} exceeds the cap 2^31 - 1", q)
            }
            Error::DivisionByZero => write!(f, "division by zero in the field"),
            Error::BadMessageLength { expected, got } => {
                write!(
                    f,
                    "message length {} does not match dimension {}",
                    got, expected
                )
            }
            Error::IndexOutOfRange { index, bound } => {
                write!(f, "index {} out of range (bound {})", index, bound)
            }
            Error::Infeasible { reason } => write!(f, "infeasible parameters: {}", reason),
            Error::TooManyItems { n_items, capacity } => {
                write!(f, "{} items exceed the code capacity {}", n_items, capacity)
            }
            Error::BadDensity { reason } => write!(f, "bad design density: {}", reason),
            Error::WidthMismatch { expected, got } => {
                write!(
                    f,
                    "width mismatch: expected {} columns, got {}",
                    expected, got
                )
            }
            Error::LengthMismatch { expected, got } => {
                write!(
                    f,
                    "length mismatch: expected {} rows, got {}",
                    expected, got
                )
            }
            Error::BadNoise { reason } => write!(f, "bad noise configuration: {}", reason),
            Error::TooLarge { reason } => write!(f, "enumeration too large: {}", reason),
            Error::BadSize { reason } => write!(f, "bad size: {}", reason),
            Error::Format { reason } => write!(f, "format error: {}", reason),
            Error::Io(e) => write!(f, "io error: {}", e),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<io::Error> for Error {
    fn from(e: io::Error) -> Self {
        Error::Io(e)
    }
}
