//! Sampling processes beneath the densities: Langevin trajectories,
//! grid Fokker-Planck evolution, occupation measures, and probability
//! currents.

mod current;
mod drift;
mod pde;
mod sde;

pub use current::{current_divergence, stationary_current, CurrentField};
pub use drift::DriftSpec;
pub use pde::evolve_fokker_planck;
pub use sde::{empirical_density, occupation_fraction, simulate, Trajectory};

use crate::core::CoreError;
use crate::maxent::MaxEntError;

#[derive(Debug, thiserror::Error)]
pub enum DynamicsError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    MaxEnt(#[from] MaxEntError),
    #[error("unstable step: {0}")]
    Stability(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("mass conservation violated: {0}")]
    Conservation(String),
    #[error("window error: {0}")]
    Window(String),
}

/// CSV export, header `t,x[,y]`.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let dims = traj.dims();
    let mut out = String::from(if dims == 1 { "t,x\n" } else { "t,x,y\n" });
    for (i, state) in traj.iter().enumerate() {
        let t = i as f64 * traj.dt();
        out.push_str(&format!("{t}"));
        for v in state {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

/// CSV export of a density snapshot, header `x[,y],p`.
pub fn density_csv(p: &crate::core::Density) -> String {
    let dims = p.grid().dims();
    let mut out = String::from(if dims == 1 { "x,p\n" } else { "x,y,p\n" });
    for (i, v) in p.values().iter().enumerate() {
        for c in p.grid().node(i) {
            out.push_str(&format!("{c},"));
        }
        out.push_str(&format!("{v}\n"));
    }
    out
}

/// CSV export of a 2D current field, header `x,y,vx,vy`.
pub fn current_csv(field: &CurrentField) -> String {
    let mut out = String::from("x,y,vx,vy\n");
    for i in 0..field.grid().len() {
        let node = field.grid().node(i);
        let vx = field.component(0)[i];
        let vy = if field.grid().dims() == 2 {
            field.component(1)[i]
        } else {
            0.0
        };
        out.push_str(&format!("{},{},{vx},{vy}\n", node[0], node.get(1).copied().unwrap_or(0.0)));
    }
    out
}
