use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Argument outside the domain of a geometric function.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("quadrature did not converge: error estimate {estimate:e} above tolerance {tolerance:e} after {intervals} subintervals")]
    QuadratureNonConvergence {
        estimate: f64,
        tolerance: f64,
        intervals: usize,
    },

    #[error("integrator step underflow at t = {t:e} (step {step:e})")]
    StepUnderflow { t: f64, step: f64 },

    #[error("integrator exceeded {steps} steps before reaching t = {target}")]
    StepBudget { steps: usize, target: f64 },

    #[error("radial solution is not positive at t = {t:e} (T = {value:e})")]
    NonPositive { t: f64, value: f64 },

    #[error("weight is not admissible (Property I: non-increasing and concave): {0}")]
    Inadmissible(String),

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("mesh quality: minimum angle {min_angle:.2} deg below floor {floor:.2} deg; increase rings/sectors")]
    MeshQuality { min_angle: f64, floor: f64 },

    #[error("degenerate triangle {index} (signed area {area:e})")]
    DegenerateTriangle { index: usize, area: f64 },

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("no radius up to {r_max} reaches weighted volume {target}")]
    BracketOverflow { target: f64, r_max: f64 },

    #[error("symmetry violation: {0}")]
    Symmetry(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
