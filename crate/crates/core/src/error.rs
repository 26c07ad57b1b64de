//! Error type shared by every module in the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes surfaced by the toolkit.
///
/// The CLI maps these onto its stable exit codes via [`Error::exit_code`]:
/// input/format problems exit 2, numerical fit failures exit 3, training
/// divergence exits 4, and incomplete pipeline state exits 5.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix not symmetric: relative asymmetry {asymmetry:.3e} exceeds {tolerance:.0e}")]
    NotSymmetric { asymmetry: f64, tolerance: f64 },

    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_diagonal:.3e})")]
    NoConvergence { sweeps: usize, off_diagonal: f64 },

    #[error("power-law fit failed{}: {reason}", layer.as_ref().map(|l| format!(" for layer '{l}'")).unwrap_or_default())]
    FitFailed { layer: Option<String>, reason: String },

    #[error("training diverged at iteration {iteration}: loss = {loss}")]
    Diverged { iteration: usize, loss: f64 },

    #[error("container format error: {0}")]
    Format(String),

    #[error("incomplete pipeline state, missing: {}", missing.join(", "))]
    Incomplete { missing: Vec<String> },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Convenience constructor for fit failures.
    pub fn fit(reason: impl Into<String>) -> Self {
        Error::FitFailed { layer: None, reason: reason.into() }
    }

    /// Attach a layer name to a fit failure, leaving other errors untouched.
    pub fn with_layer(self, layer: &str) -> Self {
        match self {
            Error::FitFailed { reason, .. } => {
                Error::FitFailed { layer: Some(layer.to_string()), reason }
            }
            other => other,
        }
    }

    /// Stable process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ShapeMismatch(_)
            | Error::InvalidArgument(_)
            | Error::Format(_)
            | Error::Io(_)
            | Error::Json(_) => 2,
            Error::NotSymmetric { .. } | Error::NoConvergence { .. } | Error::FitFailed { .. } => 3,
            Error::Diverged { .. } => 4,
            Error::Incomplete { .. } => 5,
        }
    }
}
