//! Crate-wide error type.

use crate::mesh::Placement;

#[derive(thiserror::Error, Debug)]
pub enum Error {
    #[error("mesh: {0}")]
    Mesh(String),
    #[error("placement mismatch: expected {expected:?}, got {got:?}")]
    PlacementMismatch { expected: Placement, got: Placement },
    #[error("index out of range: {0}")]
    IndexRange(String),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("iterative solver failed: {0}")]
    NoConvergence(String),
    #[error("degenerate instance: {0}")]
    Degenerate(String),
    #[error("config invalid:\n{}", .0.join("\n"))]
    Config(Vec<String>),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
