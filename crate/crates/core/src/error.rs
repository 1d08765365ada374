use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the domain of a formula or a field.
    #[error("domain error: {0}")]
    Domain(String),

    /// Iterative solver failed to reach its tolerance.
    #[error("solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    Solver { iterations: usize, residual: f64 },

    /// A configuration value violates an invariant; `field` names it.
    #[error("invalid configuration: {field}: {message}")]
    Config { field: String, message: String },

    /// Structured-text parse failure with position.
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },

    /// A diagnostic could not be computed from the given data.
    #[error("diagnostic error: {0}")]
    Diagnostic(String),

    /// Violated internal precondition (e.g. deposition of an out-of-domain particle).
    #[error("internal error: {0}")]
    Internal(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Short machine-readable tag used in the CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Solver { .. } => "solver",
            Error::Config { .. } => "config",
            Error::Parse { .. } => "parse",
            Error::Diagnostic(_) => "diagnostic",
            Error::Internal(_) => "internal",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
