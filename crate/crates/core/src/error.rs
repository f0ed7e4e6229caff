use thiserror::Error;

/// Errors raised by estimators, tests, oracles and the CLI.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed or mismatched input data (dimensions, sample sizes, CSV content).
    #[error("input error: {0}")]
    Input(String),
    /// A parameter outside its admissible range.
    #[error("parameter error: {0}")]
    Parameter(String),
    /// A factorization or other numerical routine failed.
    #[error("numerical error: {0}")]
    Numerical(String),
    /// An invalid experiment or run configuration.
    #[error("config error: {0}")]
    Config(String),
    /// A computation refused because its cost would exceed a hard guard.
    #[error("guard error: {0}")]
    Guard(String),
}

impl Error {
    /// Stable machine-readable code used in JSON error reports.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Input(_) => "input_error",
            Error::Parameter(_) => "parameter_error",
            Error::Numerical(_) => "numerical_error",
            Error::Config(_) => "config_error",
            Error::Guard(_) => "guard_error",
        }
    }

    /// Process exit code: 3 for numerical failures, 2 for everything caused by input.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn input(msg: impl Into<String>) -> Error {
    Error::Input(msg.into())
}

pub(crate) fn parameter(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}
