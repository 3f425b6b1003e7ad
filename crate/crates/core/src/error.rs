use std::path::PathBuf;

/// Errors raised anywhere in the solver pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("malformed complex: {0}")]
    Structural(String),

    #[error("face {face}: {reason}")]
    Geometry { face: usize, reason: String },

    #[error("invalid divisor: {0}")]
    Divisor(String),

    #[error("linear solve did not converge after {iterations} iterations (relative residual {residual:e})")]
    SolverDivergence { iterations: usize, residual: f64 },

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("eigenvalue iteration did not converge after {iterations} iterations (last change {change:e})")]
    EigenDivergence { iterations: usize, change: f64 },

    #[error("e^(2u) overflows: max u = {max_u}")]
    Range { max_u: f64 },

    #[error("degenerate data: {0}")]
    Degeneracy(String),

    #[error("could not seed an initial field on the constraint: {0}")]
    Seed(String),

    #[error("constraint projection failed: {0}")]
    Projection(String),

    #[error(
        "step size underflow at t = {t}: dt = {dt:e} < dt_min (local error {error:e}, constraint drift {drift:e})"
    )]
    Stiffness { t: f64, dt: f64, error: f64, drift: f64 },

    #[error("uniformization failed after {iterations} Newton iterations; residual history {history:?}")]
    Uniformization { iterations: usize, history: Vec<f64> },

    #[error("sign error: {0}")]
    Sign(String),

    #[error("field has {found} values, mesh has {expected} vertices")]
    FieldLength { expected: usize, found: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error in {path}: line {line}: {reason}")]
    Parse { path: PathBuf, line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
