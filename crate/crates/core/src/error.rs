use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("singular linear system (pivot {pivot} at column {column})")]
    SingularSystem { column: usize, pivot: f64 },

    #[error("fixed-point iteration did not converge after {iterations} sweeps (best residual {residual:e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        best: Vec<f64>,
    },

    #[error("instance too large for {what}: {size} exceeds limit {limit}")]
    InstanceTooLarge {
        what: &'static str,
        size: usize,
        limit: usize,
    },

    #[error("Legendre coefficient c_{l} mismatch: closed form {closed_form:e}, quadrature {quadrature:e}")]
    CoefficientMismatch {
        l: usize,
        closed_form: f64,
        quadrature: f64,
    },

    #[error("value {value} outside encodable range [0, {max}]")]
    OutOfRange { value: f64, max: f64 },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("polynomial degree {degree} exceeds bound {bound}; reduce r or q")]
    DegreeOverflow { degree: usize, bound: usize },

    #[error("term budget exceeded: {spins} spins needed, cap is {cap}; reduce r or q, or compile in export mode")]
    TermBudget { spins: usize, cap: usize },

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
