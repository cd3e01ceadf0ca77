//! Error type shared by every module in the crate.

use std::fmt;
use std::io;
use std::path::PathBuf;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong while loading data or running the pipeline.
#[derive(Debug)]
pub enum Error {
    /// Underlying I/O failure (missing file, permission, short read, ...).
    Io { path: PathBuf, source: io::Error },
    /// A text header or table could not be parsed. `line` is 1-based.
    Parse { path: PathBuf, line: usize, message: String },
    /// Header declares a sample encoding this reader does not support.
    UnsupportedFormat(String),
    /// Binary payload size disagrees with the header dimensions.
    SizeMismatch { path: PathBuf, expected_bytes: u64, actual_bytes: u64 },
    /// Two grids (or a grid and an operator) have incompatible shapes.
    DimensionMismatch { context: String, expected: (usize, usize), actual: (usize, usize) },
    /// A value that must be finite was NaN or infinite.
    NonFinite { context: String },
    /// A scalar parameter is outside its documented range.
    InvalidParameter { name: &'static str, message: String },
    /// Keystone table problems: every non-reference (band, column) pair must
    /// appear exactly once and stay within the sanity bound.
    ShiftTable { message: String },
    /// Spectral coefficient construction hit a non-positive radiance sum.
    DegenerateRadiance { band: Option<usize>, row: usize, col: usize },
    /// Image has no variance where the algorithm needs structure.
    ZeroVariance { context: String },
    /// Iterative numerics diverged or produced a non-finite cost.
    NumericalFailure { context: String },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Io { path, source } => write!(f, "i/o error on {}: {}", path.display(), source),
            Error::Parse { path, line, message } => {
                write!(f, "{}:{}: {}", path.display(), line, message)
            }
            Error::UnsupportedFormat(what) => write!(f, "unsupported format: {}", what),
            Error::SizeMismatch { path, expected_bytes, actual_bytes } => write!(
                f,
                "{}: binary payload is {} bytes but the header implies {}",
                path.display(),
                actual_bytes,
                expected_bytes
            ),
            Error::DimensionMismatch { context, expected, actual } => write!(
                f,
                "{}: expected {}x{}, got {}x{}",
                context, expected.0, expected.1, actual.0, actual.1
            ),
            Error::NonFinite { context } => write!(f, "non-finite value in {}", context),
            Error::InvalidParameter { name, message } => {
                write!(f, "invalid parameter `{}`: {}", name, message)
            }
            Error::ShiftTable { message } => write!(f, "keystone table: {}", message),
            Error::DegenerateRadiance { band, row, col } => match band {
                Some(b) => write!(
                    f,
                    "non-positive radiance in band {} at pixel ({}, {}); floor the data first",
                    b, row, col
                ),
                None => write!(
                    f,
                    "radiance sum across bands is below 1e-12 at pixel ({}, {})",
                    row, col
                ),
            },
            Error::ZeroVariance { context } => {
                write!(f, "{}: image has (near) zero variance", context)
            }
            Error::NumericalFailure { context } => write!(f, "numerical failure: {}", context),
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
    /// Attach a path to a raw `io::Error`.
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse { path: path.into(), line, message: message.into() }
    }

    pub fn invalid(name: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidParameter { name, message: message.into() }
    }

    pub fn dims(
        context: impl Into<String>,
        expected: (usize, usize),
        actual: (usize, usize),
    ) -> Self {
        Error::DimensionMismatch { context: context.into(), expected, actual }
    }
}
