//! Constrained maximum entropy by convex dual ascent.
//!
//! A [`ConstraintSet`] holds constraint fields J_k with targets C_k and
//! multipliers λ_k. [`solve`] finds the multipliers for which the Gibbs
//! density exp(-Σ λ_k J_k)/Z meets the targets E[J_k] = C_k, by Newton
//! iteration on the log-partition dual.

mod constraint;
mod solver;

pub use constraint::{Constraint, ConstraintSet, KAPPA_CAP};
pub use solver::{dual_value, gibbs_density, retarget, solve, MaxEntSolution, Retarget};

use crate::core::CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MaxEntError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("scaling error: {0}")]
    Scaling(String),
    #[error("infeasible target: {0}")]
    Infeasible(String),
    #[error("degenerate constraints: {0}")]
    DegenerateConstraint(String),
    #[error("no convergence after {iterations} iterations, residuals {residuals:?}")]
    NonConvergence {
        iterations: usize,
        residuals: Vec<f64>,
    },
}
