use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// The transition matrix or label is malformed.
    InvalidSystem(String),
    /// Some operation needs a primitive transition matrix.
    NotPrimitive,
    /// A word uses a forbidden transition at `index` (or an out of range symbol).
    Inadmissible {
        index: usize,
    },
    /// Two objects live on different alphabets.
    AlphabetMismatch {
        left: usize,
        right: usize,
    },
    InvalidArgument(String),
    /// An enumeration would produce more than `cap` items.
    EnumerationCap {
        cap: u64,
        requested: u128,
    },
    /// An iterative method stopped before reaching its tolerance.
    NonConvergence {
        best: f64,
        gap: f64,
        iterations: usize,
    },
    WordTooShort {
        needed: usize,
        got: usize,
    },
    /// No admissible connector of `edges` steps joins `from` to `to`.
    NoConnector {
        from: u8,
        to: u8,
        edges: usize,
    },
    InvalidMeasure(String),
    InvalidPotential(String),
    /// A hypothesis of the historic-set construction fails.
    Hypothesis(String),
    /// A construction stage could not complete.
    Construction(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidSystem(msg) => write!(f, "invalid system: {msg}"),
            Error::NotPrimitive => f.write_str("transition matrix is not primitive"),
            Error::Inadmissible { index } => {
                write!(f, "word is not admissible at position {index}")
            }
            Error::AlphabetMismatch { left, right } => {
                write!(f, "alphabet mismatch: {left} vs {right} symbols")
            }
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::EnumerationCap { cap, requested } => {
                write!(
                    f,
                    "enumeration of {requested} items exceeds the cap of {cap}"
                )
            }
            Error::NonConvergence {
                best,
                gap,
                iterations,
            } => write!(
                f,
                "no convergence after {iterations} iterations (best {best}, gap {gap:e})"
            ),
            Error::WordTooShort { needed, got } => {
                write!(f, "word too short: need {needed} symbols, got {got}")
            }
            Error::NoConnector { from, to, edges } => {
                write!(f, "no admissible path of {edges} steps from {from} to {to}")
            }
            Error::InvalidMeasure(msg) => write!(f, "invalid measure: {msg}"),
            Error::InvalidPotential(msg) => write!(f, "invalid potential: {msg}"),
            Error::Hypothesis(msg) => write!(f, "hypothesis violated: {msg}"),
            Error::Construction(msg) => write!(f, "construction failed: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

macro_rules! bail {
    ($variant:ident, $($arg:tt)*) => {
        return Err($crate::Error::$variant(alloc::format!($($arg)*)))
    };
}
pub(crate) use bail;
