use alloc::string::String;
use core::fmt;

/// Errors raised by the probability model, mechanisms, metrics and
/// certificates.
#[derive(Debug, Clone, PartialEq)]
#[non_exhaustive]
pub enum Error {
    EmptyAlphabet,
    DuplicateLabel { label: String },
    UnknownLabel { axis: &'static str, label: String },
    /// An entry of a distribution is negative or not finite.
    InvalidProbability { what: &'static str, location: String, value: f64 },
    /// A distribution (or a row of a stochastic table) does not sum to one.
    RowSum { what: &'static str, location: String, sum: f64 },
    ShapeMismatch { what: &'static str, expected: usize, found: usize },
    AlphabetMismatch { what: &'static str },
    /// A joint distribution whose marginal disagrees with the declared prior.
    MarginalMismatch { axis: &'static str, index: usize, expected: f64, found: f64 },
    UndefinedConditional { a: String },
    InvalidParameter { name: &'static str, value: f64 },
    DegenerateAlphabet { size: usize },
    DegenerateMechanism { p: f64 },
    InvalidSampleCount,
    EmptyTrace,
    InsufficientData { x: String, a: String },
    NegativeUtility { u: usize, x: usize, a: usize, value: f64 },
    NonNumericLabel { label: String },
    InvalidMetric { reason: &'static str },
    /// The pipeline violates a hypothesis the requested bound relies on.
    Hypothesis { reason: &'static str },
    /// Conditional expected utility vanishes at a cell, so no positive floor exists.
    FloorViolation { x: String, a: String },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::EmptyAlphabet => write!(f, "alphabet must contain at least one label"),
            Error::DuplicateLabel { label } => write!(f, "duplicate label {label:?}"),
            Error::UnknownLabel { axis, label } => {
                write!(f, "label {label:?} is not in the {axis} alphabet")
            }
            Error::InvalidProbability { what, location, value } => {
                write!(f, "{what}{location} = {value} is not a valid probability")
            }
            Error::RowSum { what, location, sum } => {
                write!(f, "{what}{location} sums to {sum}, expected 1")
            }
            Error::ShapeMismatch { what, expected, found } => {
                write!(f, "{what}: expected {expected} entries, found {found}")
            }
            Error::AlphabetMismatch { what } => write!(f, "alphabet mismatch: {what}"),
            Error::MarginalMismatch { axis, index, expected, found } => write!(
                f,
                "joint_xa marginal over {axis}[{index}] is {found}, prior says {expected}"
            ),
            Error::UndefinedConditional { a } => {
                write!(f, "conditioning on A = {a:?}, which has probability zero")
            }
            Error::InvalidParameter { name, value } => write!(f, "invalid {name}: {value}"),
            Error::DegenerateAlphabet { size } => {
                write!(f, "alphabet of size {size} is degenerate here (need at least 2)")
            }
            Error::DegenerateMechanism { p } => write!(
                f,
                "keep probability {p} gives a deterministic mechanism with no privacy"
            ),
            Error::InvalidSampleCount => write!(f, "sample count must be at least 1"),
            Error::EmptyTrace => write!(f, "trace is empty"),
            Error::InsufficientData { x, a } => {
                write!(f, "no samples in cell (x = {x:?}, a = {a:?}) and smoothing is 0")
            }
            Error::NegativeUtility { u, x, a, value } => {
                write!(f, "utility g[{u}][{x}][{a}] = {value} is negative or not finite")
            }
            Error::NonNumericLabel { label } => {
                write!(f, "label {label:?} cannot be read as a non-negative number")
            }
            Error::InvalidMetric { reason } => write!(f, "invalid attribute metric: {reason}"),
            Error::Hypothesis { reason } => write!(f, "hypothesis violated: {reason}"),
            Error::FloorViolation { x, a } => write!(
                f,
                "conditional expected utility is zero at (x = {x:?}, a = {a:?}); no positive floor"
            ),
        }
    }
}

impl core::error::Error for Error {}
