use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Shapes, lengths or operator kinds do not fit together.
    #[error("structural error: {0}")]
    Structural(String),

    /// An operator produced a non-finite value during tree evaluation.
    #[error("non-finite result at tree node {node}")]
    NonFinite { node: usize },

    /// A derivative was requested at a singular point or overflowed.
    #[error("non-finite gradient at trace entry {entry}")]
    NonFiniteGradient { entry: usize },

    /// An integrator produced a non-finite state. `index` is the substep
    /// (inside a single step) or the last valid grid index (inside a rollout).
    #[error("integration diverged at index {index}")]
    Divergence { index: usize },

    /// The adaptive reference integrator could not make progress.
    #[error("step size underflow at t = {t}")]
    Stiffness { t: f64 },

    /// A ground-truth Hamiltonian was evaluated at a singular configuration.
    #[error("singular configuration: {0}")]
    Singularity(String),

    /// A metric is undefined at the given index (e.g. zero normalizer).
    #[error("metric undefined at index {index}")]
    UndefinedMetric { index: usize },

    #[error("invalid configuration: {0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite { .. }
                | Error::NonFiniteGradient { .. }
                | Error::Divergence { .. }
                | Error::Stiffness { .. }
                | Error::Singularity(_)
                | Error::UndefinedMetric { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
