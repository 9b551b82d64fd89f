//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid integer range: lo {lo} > hi {hi}")]
    EmptyRange { lo: i64, hi: i64 },

    #[error("quantile argument must lie strictly in (0,1), got {0}")]
    QuantileDomain(f64),

    #[error("truncation threshold must be nonnegative, got {0}")]
    NegativeThreshold(f64),

    #[error("epsilon must lie strictly in (1/2,1), got {0}")]
    EpsilonOutOfRange(f64),

    #[error("smoothness order alpha out of range: {0}")]
    AlphaOutOfRange(&'static str),

    #[error("node budget n must be at least {min}, got {got}")]
    BudgetTooSmall { min: u64, got: u64 },

    #[error("replicate count must be at least 2, got {0}")]
    TooFewReplicates(u32),

    #[error("outer replication count must be at least 100, got {0}")]
    TooFewOuterRuns(u32),

    #[error("exponent p must be 1, 2 or 3, got {0}")]
    UnsupportedExponent(u32),

    #[error("interval index {j} outside {{-5n+1,...,5n}} for n = {n}")]
    IntervalIndexOutOfRange { j: i64, n: u32 },

    #[error("unknown test function id `{0}`")]
    UnknownFunction(String),

    #[error("test function `{0}` carries no reference integral")]
    MissingReference(String),

    #[error("integrand returned a non-finite value at x = {0}")]
    NonFiniteIntegrand(f64),

    #[error("quadrature failed to converge: {0}")]
    QuadratureDidNotConverge(String),

    #[error("requested tolerance {0} below the supported floor 1e-13")]
    ToleranceTooTight(f64),

    #[error("delta quadrature needs at least 64 points, got {0}")]
    TooFewDeltaPoints(u32),

    #[error("slope fit needs at least 3 usable points, got {0}")]
    InsufficientPoints(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerical machinery itself, as opposed to
    /// invalid configuration. The CLI maps these to a distinct exit code.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFiniteIntegrand(_) | Error::QuadratureDidNotConverge(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
