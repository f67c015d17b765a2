use thiserror::Error;

/// Errors raised by curve, gluing, meshing, and reconstruction operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid curve: {0}")]
    InvalidCurve(String),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("operation not supported for {kind} curves: {hint}")]
    UnsupportedKind { kind: &'static str, hint: &'static str },

    #[error("gluing error: {0}")]
    Gluing(String),

    #[error("meshing failed on piece {piece}: {reason}")]
    Meshing { piece: usize, reason: String },

    #[error("metric precondition failed: {0}")]
    Precondition(String),

    #[error("solver did not converge: {0}")]
    Solver(Box<SolverFailure>),

    #[error("scene error: {0}")]
    Scene(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Diagnostic payload for a reconstruction that failed to converge.
#[derive(Debug, Clone)]
pub struct SolverFailure {
    pub reason: String,
    /// Best radii (or flattened positions for the least-squares route) reached.
    pub best_iterate: Vec<f64>,
    /// Residual norm after every accepted iteration.
    pub residual_history: Vec<f64>,
}

impl std::fmt::Display for SolverFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} after {} iterations (last residual {:.3e})",
            self.reason,
            self.residual_history.len(),
            self.residual_history.last().copied().unwrap_or(f64::NAN)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
