use thiserror::Error;

/// Errors raised by estimation, data loading, and simulation routines.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid user input: bad columns, out-of-range parameters, contract violations.
    #[error("input error: {0}")]
    Input(String),

    /// Data too degenerate to work with (empty file, an arm with too few units, ...).
    #[error("degenerate data: {0}")]
    DegenerateData(String),

    /// A learner could not be fit on the given training data.
    #[error("fit error: {0}")]
    Fit(String),

    /// A point estimate is numerically meaningless (e.g. a ratio with a near-zero
    /// denominator).
    #[error("numeric degeneracy: {0}")]
    NumericDegenerate(String),

    /// A combinatorial guard was exceeded (exhaustive enumeration too large).
    #[error("size guard exceeded: {0}")]
    SizeGuard(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
