use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Errors raised by the numeric core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Not enough observations for the requested operation.
    SeriesTooShort {
        needed: usize,
        got: usize,
    },
    /// Zero (or numerically vanishing) variance.
    DegenerateSeries,
    /// A value was NaN or infinite.
    NonFinite,
    NonPositiveBinWidth,
    /// Two histograms were built on different grids.
    GridMismatch,
    /// `p` has mass on a bin where `q` has none.
    UndefinedKl,
    NonPositiveKurtosis,
    LengthMismatch {
        left: usize,
        right: usize,
    },
    InvalidMatrix(String),
    /// Two dendrograms do not share the same label set.
    LabelMismatch,
    /// All cophenetic distances of a dendrogram are equal.
    DegenerateHeights,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::SeriesTooShort { needed, got } => {
                write!(
                    f,
                    "series too short: need at least {needed} values, got {got}"
                )
            }
            Error::DegenerateSeries => f.write_str("degenerate series: variance is zero"),
            Error::NonFinite => f.write_str("input contains a non-finite value"),
            Error::NonPositiveBinWidth => f.write_str("bin width must be positive and finite"),
            Error::GridMismatch => f.write_str("histograms are not on the same grid"),
            Error::UndefinedKl => {
                f.write_str("KL divergence undefined: p has mass where q has none")
            }
            Error::NonPositiveKurtosis => f.write_str("kurtosis must be positive"),
            Error::LengthMismatch { left, right } => {
                write!(f, "length mismatch: {left} vs {right}")
            }
            Error::InvalidMatrix(why) => write!(f, "invalid distance matrix: {why}"),
            Error::LabelMismatch => f.write_str("dendrograms have different label sets"),
            Error::DegenerateHeights => f.write_str("all cophenetic distances are equal"),
        }
    }
}

impl core::error::Error for Error {}
