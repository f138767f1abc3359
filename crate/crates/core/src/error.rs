use thiserror::Error;

/// Errors raised by the solvers and field operators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("degenerate grid: axis `{axis}` has {len} points, need at least {need}")]
    DegenerateGrid {
        axis: &'static str,
        len: usize,
        need: usize,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("CFL violation: c*dt/dx = {ratio:.6} exceeds the ceiling {limit}")]
    CflViolation { ratio: f64, limit: f64 },

    #[error("numerical divergence (non-finite value) at step {step}")]
    Divergence { step: usize },

    #[error("index variance mismatch: expected {expected}, found {found}")]
    VarianceMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("every point of time slice {slice} lies below the node threshold")]
    AllNodes { slice: usize },

    #[error("linear solve failed at step {step}: {detail}")]
    LinearSolve { step: usize, detail: String },

    #[error("path is not closed: covers {len} of {nx} points")]
    OpenPath { len: usize, nx: usize },

    #[error("seed {index} at x = {x} lies outside the domain")]
    SeedOutsideDomain { index: usize, x: f64 },
}

pub type Result<T> = std::result::Result<T, LabError>;
