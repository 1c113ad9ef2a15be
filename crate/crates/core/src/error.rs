use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

/// One violated configuration invariant, addressed by a dotted field path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    pub path: String,
    pub message: String,
}

impl FieldError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self { path: path.into(), message: message.into() }
    }
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// Every invariant violation found while validating a configuration.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationErrors(pub Vec<FieldError>);

impl ValidationErrors {
    pub fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.0.push(FieldError::new(path, message));
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &FieldError> {
        self.0.iter()
    }

    /// True if any entry mentions `needle` in its path or message.
    pub fn mentions(&self, needle: &str) -> bool {
        self.0.iter().any(|e| e.path.contains(needle) || e.message.contains(needle))
    }
}

impl fmt::Display for ValidationErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "  {e}")?;
        }
        Ok(())
    }
}

/// Failures of the analytic polariton layer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolaritonError {
    #[error("angle undefined during storage (all pump amplitudes are zero)")]
    Storage,
    #[error("angle {0} undefined: degenerate pump configuration")]
    Undefined(String),
    #[error("{0}")]
    Degenerate(String),
    #[error("invalid argument: {0}")]
    Argument(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration:\n{0}")]
    Invalid(ValidationErrors),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed configuration: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("numerical failure at step {step}, grid index {index}: {what}")]
    Numerical { step: usize, index: usize, what: String },
    #[error(transparent)]
    Polariton(#[from] PolaritonError),
    #[error("experiment: {0}")]
    Experiment(String),
}

impl From<ValidationErrors> for Error {
    fn from(e: ValidationErrors) -> Self {
        Error::Invalid(e)
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
