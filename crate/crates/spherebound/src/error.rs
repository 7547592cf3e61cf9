//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at column {column}: {message}")]
    Parse { column: usize, message: String },

    #[error("degree mismatch: expected {expected}, found {found}")]
    DegreeMismatch { expected: u32, found: u32 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("rank {rank} out of range for basis of dimension {dim}")]
    RankOutOfRange { rank: usize, dim: usize },

    #[error("odd degree {0}: apply the odd-degree lift first")]
    OddDegree(u32),

    #[error("even degree {0}: the odd-degree lift applies to odd factors only")]
    EvenDegree(u32),

    #[error("level k = {k} below the form half-degree d = {d}")]
    LevelBelowDegree { k: u32, d: u32 },

    #[error("size guard exceeded: {0}")]
    SizeGuard(String),

    #[error("{0}")]
    DomainError(String),

    #[error("matrix B of the pencil is not positive definite: {0}")]
    NotSpd(String),

    #[error("eigensolver did not converge after {iterations} iterations (best value {best}, residual {residual:.3e})")]
    NonConvergence { iterations: usize, best: f64, residual: f64 },

    #[error("hierarchy monotonicity violated at level k = {k}: {prev} -> {next} (beyond {slack:.1e} slack); solver tolerance too loose")]
    MonotonicityViolation { k: u32, prev: f64, next: f64, slack: f64 },

    #[error("zero tensor has no spectral-norm hierarchy")]
    ZeroTensor,

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
