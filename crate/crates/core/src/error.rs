use core::fmt;

use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A numeric argument was NaN/infinite or outside its domain.
    InvalidInput(String),
    /// A label outside `1..=K` was requested.
    InvalidLabel { label: u32, num_labels: u32 },
    /// The quantizer or another object was built inconsistently.
    Config(String),
    /// A cell carries (numerically) zero probability under the given Gaussian.
    DegenerateCell,
    /// GAMP produced a non-finite value.
    Divergence { iteration: usize },
    /// Every probed design point gave a non-finite objective.
    DesignFailure,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::InvalidLabel { label, num_labels } => {
                write!(f, "label {label} outside 1..={num_labels}")
            }
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::DegenerateCell => f.write_str("cell has zero probability mass"),
            Error::Divergence { iteration } => {
                write!(f, "non-finite state at iteration {iteration}")
            }
            Error::DesignFailure => f.write_str("objective non-finite at every design point"),
        }
    }
}

impl core::error::Error for Error {}

impl Error {
    /// Short stable identifier, used for machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid-input",
            Error::InvalidLabel { .. } => "invalid-label",
            Error::Config(_) => "config",
            Error::DegenerateCell => "degenerate-cell",
            Error::Divergence { .. } => "divergence",
            Error::DesignFailure => "design-failure",
        }
    }
}
