use thiserror::Error;

use crate::plap::IterationTrace;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("mesh has no interior nodes")]
    EmptyInterior,

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("{what} did not converge after {iterations} iterations (last residual {residual:e})")]
    NonConvergence {
        what: String,
        iterations: usize,
        residual: f64,
        trace: IterationTrace,
    },

    #[error("eigenfield is not positive at interior node {node}")]
    DegenerateEigenfield { node: usize },

    #[error("nonlinearity evaluated outside the open cone: s1={s1:e}, s2={s2:e}")]
    OutsideCone { s1: f64, s2: f64 },

    #[error("hypotheses violated: {0}")]
    Hypotheses(String),

    #[error("custom nonlinearity fails its growth envelope: {0}")]
    Envelope(String),

    #[error("C = {c} too small: barrier ordering fails at node {node} (margin {margin:e})")]
    CTooSmall { c: f64, node: usize, margin: f64 },

    #[error("no admissible C up to {cap:e}; failing: {failing}")]
    InfeasibleSearch { cap: f64, failing: String },

    #[error("lattice combination is not ordered at node {node} (gap {gap:e})")]
    Lattice { node: usize, gap: f64 },

    #[error("sweep {sweep}: {field} left the barrier rectangle at node {node} by {amount:e}")]
    MonotonicityViolation {
        sweep: usize,
        field: &'static str,
        node: usize,
        amount: f64,
    },

    #[error("outer iteration {iteration}: {detail}")]
    InvarianceFailure { iteration: usize, detail: String },

    #[error("field length {got} does not match mesh with {expected} nodes")]
    LengthMismatch { expected: usize, got: usize },

    #[error("matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed field file: {0}")]
    FieldFile(String),
}

pub type Result<T> = std::result::Result<T, Error>;
