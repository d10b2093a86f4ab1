//! Numerical laboratory for constrained maximum entropy and its dual,
//! variational free energy minimisation.
//!
//! The crate is organised around a handful of currencies:
//!
//! * [`core::Density`] — a normalised probability density on a rectangular
//!   1D/2D grid, consumed by every information functional.
//! * [`maxent::ConstraintSet`] — constraint functions with targets and
//!   multipliers; doubles as the potential for the sampling dynamics and as
//!   the choice of gauge.
//! * [`blanket::GaussianSystem`] — a joint Gaussian over (eta, b, mu) blocks
//!   housing the Markov blanket and the synchronisation map.
//! * [`dynamics::Trajectory`] — sampled states with a step size, for
//!   occupation measures, currents, and stochastic entropy.
//!
//! The [`diagnostics`] module turns the identities connecting these pieces
//! into named, runnable checks; the `maxent-lab` binary batches them from a
//! JSON scenario config.

pub mod blanket;
pub mod config;
pub mod core;
pub mod diagnostics;
pub mod dynamics;
pub mod experiments;
pub mod gauge;
pub mod maxent;
