//! Constraint geometry: the potential as a choice of gauge, its gradient
//! as the connection, parallel transport of density values, and the
//! vertical/horizontal splitting of flows with its trapping consequences.

mod flows;
mod structure;
mod trapping;

pub use flows::{horizontal_flow, vertical_flow};
pub use structure::{parallel_transport, split_velocity, GaugeSplit, GaugeStructure};
pub use trapping::{trapping_check, TrappingReport};

use crate::core::CoreError;
use crate::dynamics::DynamicsError;
use crate::maxent::MaxEntError;

#[derive(Debug, thiserror::Error)]
pub enum GaugeError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    MaxEnt(#[from] MaxEntError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("outside domain: {0}")]
    Domain(String),
    #[error("degenerate contour: {0}")]
    DegenerateContour(String),
    #[error("unstable step: {0}")]
    Stability(String),
    #[error("region is not a sublevel set: {0}")]
    RegionShape(String),
    #[error("flow did not converge: {0}")]
    NonConvergence(String),
    #[error("dimension mismatch: {0}")]
    Dimensionality(String),
}
