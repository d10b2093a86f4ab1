//! Joint-Gaussian particular partition (external, blanket, internal),
//! synchronization maps, recognition densities, free energies, and the
//! equivalence checks between free-energy minimization and constrained
//! maximum entropy.

mod energy;
mod sync;
mod system;

pub use energy::{
    maxent_dual_check, minimize_free_energy, variational_free_energy, BlanketReport,
    DualCheckReport, RecognitionDensity,
};
pub use sync::{build_sync_map, AffineMap, SyncMap};
pub use system::{Block, GaussianSystem};

use crate::core::CoreError;
use crate::maxent::MaxEntError;

#[derive(Debug, thiserror::Error)]
pub enum BlanketError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    MaxEnt(#[from] MaxEntError),
    #[error("degenerate covariance: {0}")]
    Degenerate(String),
    #[error("dimension mismatch: {0}")]
    Dimensionality(String),
    #[error("synchronization map not injective: {0}")]
    NonInjectiveSync(String),
    #[error("free-energy minimization failed: {0}")]
    NonConvergence(String),
}
