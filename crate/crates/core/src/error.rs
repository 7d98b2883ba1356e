use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    Shape { expected: Vec<usize>, actual: Vec<usize> },

    #[error("{name} = {value} is outside its domain ({domain})")]
    Domain { name: &'static str, value: f64, domain: &'static str },

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("non-finite value at step {step}: {context}")]
    NonFinite { step: usize, context: String },

    #[error("iterate diverged at step {step} (max |x| = {max_abs:e})")]
    Diverged { step: usize, max_abs: f64 },

    #[error("training diverged at step {step} (loss = {loss:e})")]
    TrainingDiverged { step: usize, loss: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{origin}, line {line}: {message}")]
    Parse { origin: String, line: usize, message: String },

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn shape(expected: &[usize], actual: &[usize]) -> Self {
        Error::Shape { expected: expected.to_vec(), actual: actual.to_vec() }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Validation failures (bad input or config) as opposed to failures while running.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Shape { .. } | Error::Domain { .. } | Error::Invalid(_) | Error::Parse { .. } | Error::Config(_)
        )
    }
}

pub(crate) fn check_unit_interval(name: &'static str, t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(Error::Domain { name, value: t, domain: "[0, 1]" })
    }
}
