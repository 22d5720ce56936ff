//! Geometric programming.
//!
//! Models problems of the form
//!
//! ```text
//! maximize/minimize   monomial(x)
//! subject to          posynomial_i(x) <= 1
//!                     monomial_j(x)    = 1
//!                     lower_k <= x_k <= upper_k,   x_k > 0
//! ```
//!
//! and solves them to certified accuracy with a log-barrier interior-point
//! method after the standard `y = ln x` convexifying transform. See
//! [`GpProblem`] for modelling and [`solve`] for the solver contract
//! (status, duality gap, KKT residual, infeasibility certificates).
//!
//! The crate is self-contained and fully deterministic: identical inputs
//! produce identical iterates on every run.

mod expr;
mod problem;
mod solver;

pub use expr::{Monomial, Posynomial, VarId};
pub use problem::{GpProblem, Sense, VarDecl, MAX_LOG};
pub use solver::{solve, ConstraintViolation, GpSolution, SolverOptions, Status};

/// Errors surfaced by problem validation or by numeric failure inside the
/// solver. Infeasibility is *not* an error: it is reported through
/// [`Status::Infeasible`] with a certificate.
#[derive(Debug, thiserror::Error)]
pub enum GpError {
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
}
