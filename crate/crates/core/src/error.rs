use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point is not on the gauge boundary (|g_E(x) - 1| = {deviation:.3e})")]
    NotOnBoundary { deviation: f64 },

    #[error("membership undecided: |margin| = {margin:.3e} below tolerance")]
    Indeterminate { margin: f64 },

    #[error("solver did not converge after {iterations} iterations (gap {gap:.3e})")]
    NoConvergence { iterations: usize, gap: f64 },

    #[error("shell acceptance rate {rate:.3e} is below 1e-5")]
    EmptyShell { rate: f64 },

    #[error("least-squares system ill conditioned (condition number {condition:.3e})")]
    IllConditioned { condition: f64 },

    #[error("fitted mass {mass:.3e} in cell {cell} is below -3 sigma ({sigma:.3e})")]
    NegativeMass { cell: usize, mass: f64, sigma: f64 },

    #[error("degenerate profile: reference total {total:.3e} within noise {sigma:.3e}")]
    DegenerateProfile { total: f64, sigma: f64 },

    #[error("body is not of class C2+ here (min eigenvalue {min_eigenvalue:.3e})")]
    NotSmooth { min_eigenvalue: f64 },

    #[error("relative shape tensor asymmetric (relative asymmetry {asymmetry:.3e})")]
    TensorAsymmetry { asymmetry: f64 },

    #[error("Aleksandrov-Fenchel chain violated at j = {index} by {excess:.3e} (> 3 sigma)")]
    ChainViolation { index: usize, excess: f64 },

    #[error("degenerate polygon edge of length {length:.3e}")]
    DegenerateEdge { length: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
