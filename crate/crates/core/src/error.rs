use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("signal component {component} failed at t={t}: {reason}")]
    SignalEval {
        component: usize,
        t: f64,
        reason: String,
    },

    #[error("expression parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("scenario not found: {0}")]
    ScenarioNotFound(String),

    #[error("unsupported dimension q={q}: {reason}")]
    UnsupportedDimension { q: usize, reason: &'static str },

    #[error("simulation diverged at t={t} (state component {component}){context}")]
    Divergence {
        t: f64,
        component: usize,
        context: String,
    },

    #[error("estimator '{label}': {source}")]
    Estimator {
        label: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True when the root cause is a numerical blow-up rather than bad input.
    pub fn is_divergence(&self) -> bool {
        match self {
            Error::Divergence { .. } => true,
            Error::Estimator { source, .. } => source.is_divergence(),
            _ => false,
        }
    }

    pub(crate) fn with_label(self, label: &str) -> Self {
        Error::Estimator {
            label: label.to_string(),
            source: Box::new(self),
        }
    }
}
