use thiserror::Error;

/// Errors raised by the numerical kernels and experiment drivers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value at node ({i}, {j})")]
    NonFinite { i: usize, j: usize },

    #[error("fractional order s = {0} outside (0, 1)")]
    OrderOutOfRange(f64),

    #[error("kernel radius R = {radius} must exceed the support diameter {diameter}")]
    KernelRadiusTooSmall { radius: f64, diameter: f64 },

    #[error("zero padding to avoid wraparound needs length {required}, limit is {limit}")]
    PaddingTooSmall { required: usize, limit: usize },

    #[error("cutoff {cutoff} is below the grid spacing {h}: no pairs to sum")]
    CutoffBelowSpacing { cutoff: f64, h: f64 },

    #[error("degree undefined: |u| = {min_modulus} < {c_min} on the loop")]
    DegreeUndefined { min_modulus: f64, c_min: f64 },

    #[error("loop under-resolved: winding residual {residual} >= 0.1")]
    UnderResolvedLoop { residual: f64 },

    #[error("winding ({winding}) and area ({area}) degree estimates differ by more than 0.2")]
    DegreeMismatch { winding: f64, area: f64 },

    #[error("total degree {total} does not match boundary degree {d0}")]
    DegreeConstraint { total: i64, d0: i64 },

    #[error("flat norm did not converge: best value {best_value}, gap {gap}")]
    FlatNormNotConverged { best_value: f64, gap: f64 },

    #[error("linear solver did not converge: residual {residual} after {iterations} iterations")]
    SolverNotConverged { residual: f64, iterations: usize },

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
