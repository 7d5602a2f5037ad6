use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the simulators and integrators.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violated one of its preconditions.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A position or index fell outside the spatial domain.
    #[error("position {position:?} lies outside the domain [0, {side})^{dimension}")]
    Domain {
        position: Vec<f64>,
        side: f64,
        dimension: usize,
    },

    /// The environment kernel cannot be used on the requested grid.
    #[error("inadmissible environment kernel: {0}")]
    Kernel(String),

    /// Grid covariance matrix is not positive semidefinite.
    #[error(
        "covariance matrix is not positive semidefinite (pivot residual {pivot:.3e}, smallest eigenvalue {min_eigenvalue:?})"
    )]
    NotPositiveSemidefinite {
        pivot: f64,
        min_eigenvalue: Option<f64>,
    },

    /// A simulation state violated its invariants.
    #[error("invalid state: {0}")]
    State(String),

    /// The duality check was asked for a configuration in which the identity does not hold.
    #[error("unsupported duality configuration: {0}")]
    Duality(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed grid dump: {0}")]
    Format(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

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
}

/// Fails with a config error unless `value` is finite.
pub(crate) fn ensure_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::config(format!("{name} must be finite, got {value}")))
    }
}
