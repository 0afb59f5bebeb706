use thiserror::Error;

/// Library-wide error type.
///
/// `is_input_error` distinguishes malformed input (CLI exit code 2) from
/// computational failures that honor an operation's error contract (exit 1).
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum Error {
    #[error("zero divisor")]
    ZeroDivisor,
    #[error("inexact polynomial division")]
    InexactDivision,
    #[error("gcd of two zero polynomials")]
    GcdOfZero,
    #[error("resultant of zero polynomial")]
    ZeroResultantInput,
    #[error("zero polynomial")]
    ZeroPolynomial,
    #[error("valuation of zero")]
    ValuationOfZero,
    #[error("malformed rational: {0}")]
    MalformedRational(String),
    #[error("malformed point: {0}")]
    MalformedPoint(String),
    #[error("degenerate map")]
    DegenerateMap,
    #[error("degree must exceed 1")]
    DegreeTooSmall,
    #[error("coefficient list has wrong length")]
    BadCoefficientCount,
    #[error("exact iteration budget exceeded")]
    IterationBudgetExceeded,
    #[error("exact construction cap exceeded")]
    DegreeCapExceeded,
    #[error("exceptional target")]
    ExceptionalTarget,
    #[error("repeated roots")]
    RepeatedRoots,
    #[error("pole of the dehomogenized Q")]
    PoleOfQ,
    #[error("numeric mode requires the archimedean place")]
    NumericModeFinitePlace,
    #[error("point at infinity not allowed here")]
    InfinityNotAllowed,
    #[error("complex root finding failed to converge")]
    RootFindingFailed,
    #[error("precision failure: doubled-precision recomputation disagrees")]
    PrecisionFailure,
    #[error("{0}")]
    Unsupported(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// True for errors in the "invalid input" class (CLI exit code 2).
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::MalformedRational(_)
                | Error::MalformedPoint(_)
                | Error::DegenerateMap
                | Error::DegreeTooSmall
                | Error::BadCoefficientCount
                | Error::ZeroPolynomial
                | Error::InvalidInput(_)
                | Error::Io(_)
        )
    }
}
