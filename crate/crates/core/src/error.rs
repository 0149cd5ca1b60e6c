use thiserror::Error;

/// Errors raised by the solver, the verifier and the orchestration layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("configuration rejected: {0}")]
    Config(String),

    #[error("quadrature resolution {axis}={got} below dealiasing margin {need}")]
    Resolution {
        axis: &'static str,
        got: usize,
        need: usize,
    },

    #[error("density not strictly positive at t={t:.6}, x={x:.6}, y={y:.6} (value {value:.3e})")]
    Positivity { t: f64, x: f64, y: f64, value: f64 },

    #[error("CFL limit exceeded at t={t:.6}: max|u|*dt/h = {cfl:.3} > {limit}")]
    StepSize { t: f64, cfl: f64, limit: f64 },

    #[error("non-finite value in {term}")]
    Overflow { term: &'static str },

    #[error("momentum step diverged at t={t:.6}")]
    Diverged { t: f64 },

    #[error("singular matrix: {0}")]
    Singular(&'static str),

    #[error("fixed point iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("expression error: {0}")]
    Expr(String),

    #[error("archive error: {0}")]
    Archive(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
