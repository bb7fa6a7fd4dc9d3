use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DgpError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("location {x} is outside the domain [{lo}, {hi}]")]
    OutsideDomain { x: f64, lo: f64, hi: f64 },

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("{context}: matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemidefinite {
        context: &'static str,
        min_eigenvalue: f64,
    },

    #[error("{context}: symmetric factorization failed after jitter escalation")]
    Factorization { context: &'static str },

    #[error("{context}: matrix is rank deficient")]
    RankDeficient { context: &'static str },

    #[error("quadrature grid with {nodes} nodes is too coarse for {basis_size} basis functions (need at least {required})")]
    InsufficientQuadrature {
        nodes: usize,
        basis_size: usize,
        required: usize,
    },

    #[error("call order violated: {operation} requires a {expected} state")]
    OrderViolation {
        operation: &'static str,
        expected: &'static str,
    },

    #[error("location {x} is {distance:e} away from the nearest grid node (tolerance {tolerance:e})")]
    OffGrid {
        x: f64,
        distance: f64,
        tolerance: f64,
    },

    #[error("grid with {nodes} nodes exceeds the dense-path cap of {cap}")]
    GridTooLarge { nodes: usize, cap: usize },
}

pub type Result<T, E = DgpError> = std::result::Result<T, E>;
