use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A caller broke a structural precondition (vector lengths, indices).
    #[error("contract violation: {0}")]
    Contract(String),

    /// No punishment length can deter deviation for these parameters.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// The n* scan reached its cap without the full-spectrum utility dropping below the cost.
    #[error("entry scan exceeded cap: n* >= {lower_bound}")]
    CapExceeded { lower_bound: usize },

    /// No candidate trade quantum was certified as an equilibrium.
    #[error("no equilibrium: {0}")]
    NoEquilibrium(String),

    /// A theorem hypothesis needed by the verifier does not hold.
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    /// Invalid scenario or injector configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Scenario file parse error.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
