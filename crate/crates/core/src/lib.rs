//! Generalized probabilistic theories: convex state spaces, reversible
//! dynamics, composites and the postulate checkers built on top of them.

pub mod composites;
pub mod convex;
pub mod error;
pub mod groups;
pub mod linalg;
pub mod lp;
pub mod pauli;
pub mod postulates;
pub mod sampling;
pub mod theories;

pub use error::{Error, Result};

/// Default absolute tolerance for membership and effect checks.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;
