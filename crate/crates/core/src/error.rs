use thiserror::Error;

/// Errors raised by the laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("root bracketing failed on [{lo}, {hi}]: {reason}")]
    Bracket { lo: f64, hi: f64, reason: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// Every null likelihood ratio coincides, so no level-alpha NP test
    /// can be separated from the constant test.
    #[error("trivial-test regime: {0}")]
    TrivialTest(String),

    #[error("grid box captures only {captured} of the null mass (need at least {required})")]
    BoxTooSmall { captured: f64, required: f64 },
}

pub type Result<T> = std::result::Result<T, LabError>;
