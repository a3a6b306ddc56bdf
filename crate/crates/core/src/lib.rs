//! Semidiscrete calculus for stochastic parabolic equations on the unit
//! hypercube: staggered meshes, discrete operators and norms, Carleman weight
//! families, a forward Euler–Maruyama solver, observation operators, and the
//! numerical certification and stability experiments built on them.
//!
//! The numerical core is generic over the scalar type; the experiment drivers
//! and the CLI run at [`Real`] (`f64`).

pub mod calculus;
pub mod error;
pub mod grid;
pub mod linalg;
pub mod mesh;
pub mod norms;
pub mod scalar;
pub mod observation;
pub mod solver;
pub mod weights;

pub use error::{Error, Result};
pub use scalar::{num, Scalar};

/// Working precision of the experiment drivers and the CLI.
pub type Real = f64;

/// Grid function at working precision.
pub type GridFnR = grid::GridFn<Real>;
/// Boundary function at working precision.
pub type BoundaryFnR = grid::BoundaryFn<Real>;
