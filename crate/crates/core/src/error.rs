use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point ({0}, {1}) lies outside the domain")]
    OutsideDomain(f64, f64),

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid coefficient field: {0}")]
    InvalidField(String),

    #[error("classification error: {0}")]
    Classification(String),

    #[error("ellipticity violated at node ({i}, {j}): {detail}")]
    Ellipticity { i: usize, j: usize, detail: String },

    #[error("insufficient resolution: {0}")]
    Resolution(String),

    #[error("no smoothing scale produced a good-class surrogate (tried {tried} scales)")]
    NoSurrogate { tried: usize },

    #[error("degenerate metric: {0}")]
    Metric(String),

    #[error("iteration did not converge after {iterations} iterations (last residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("grid function does not vanish on the clamped boundary layers (max |u| = {0:e})")]
    Support(f64),

    #[error("exponential weight overflow: lambda * osc(phi) = {0} exceeds 300")]
    Scaling(f64),

    #[error("linear solver failure: {detail} (residual {residual:e})")]
    Solver { detail: String, residual: f64 },

    #[error("kernel value {value:e} underflows at the probe z = ({z1}, {z2}), t = {t}")]
    Underflow { value: f64, z1: f64, z2: f64, t: f64 },

    #[error("phi is not admissible: {0}")]
    Certificate(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
