use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A domain invariant was violated (probabilities, winner shares, ordering).
    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("argument out of range: {0}")]
    Range(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("singular parameters: {0}")]
    Singular(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("construction failed: {0}")]
    Construction(String),

    #[error("problem too large: {0}")]
    Size(String),

    #[error("linear program {0}")]
    Lp(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

macro_rules! ensure {
    ($cond:expr, $variant:ident, $($arg:tt)+) => {
        if !$cond {
            return Err($crate::Error::$variant(format!($($arg)+)));
        }
    };
}
pub(crate) use ensure;
