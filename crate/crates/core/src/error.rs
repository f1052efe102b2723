use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A function was called outside its stated domain.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("mesh error: {0}")]
    Mesh(String),

    /// The staggered loop or a Newton solve failed to converge.
    #[error("no convergence after {iterations} iterations (last error {last_error:.3e})")]
    NonConvergence { iterations: usize, last_error: f64 },

    #[error("linear solve failed: {0}")]
    LinearSolveFailure(String),

    #[error("singular matrix")]
    SingularMatrix,

    /// Adaptive stepping hit the minimum step size without converging.
    #[error("aborted at minimum step size dt={dt:.3e} (t={t:.6}): {detail}")]
    AbortAtMinStep { t: f64, dt: f64, detail: String },

    /// Wedge equilibrium has no solution for the given angles.
    #[error("infeasible wedge: cos(theta) - sin(theta)*tan(phi) <= 0")]
    InfeasibleWedge,

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid config value for `{key}`: {message}")]
    Validation { key: String, message: String },

    #[error("unknown scenario case: {0}")]
    UnknownCase(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
