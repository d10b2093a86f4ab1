//! Grids, densities, quadrature, and the information functionals every
//! other module consumes.

mod density;
mod functionals;
mod grid;
mod region;

pub use density::Density;
pub use functionals::{
    entropy, fisher_information, gradient_field, kl_divergence, marginal, mutual_information,
    region_mass, restrict, safe_ln,
};
pub use grid::Grid;
pub use region::Region;

use thiserror::Error;

/// Normalisation tolerance for a valid [`Density`].
pub const NORM_TOL: f64 = 1e-9;

/// Values below this count as zero support.
pub const SUPPORT_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("numeric input error: {0}")]
    NumericInput(String),
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
    #[error("support mismatch: {0}")]
    SupportMismatch(String),
    #[error("degenerate region: {0}")]
    DegenerateRegion(String),
    #[error("dimensionality error: {0}")]
    Dimensionality(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
}
