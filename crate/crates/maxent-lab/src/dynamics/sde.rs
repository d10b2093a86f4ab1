use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::core::{Density, Grid, Region};

use super::{DriftSpec, DynamicsError};

/// A time-ordered sequence of states on a grid domain, stored flat.
#[derive(Debug, Clone)]
pub struct Trajectory {
    states: Vec<f64>,
    dims: usize,
    dt: f64,
    seed: u64,
}

impl Trajectory {
    pub(crate) fn from_states(states: Vec<f64>, dims: usize, dt: f64, seed: u64) -> Self {
        Trajectory {
            states,
            dims,
            dt,
            seed,
        }
    }

    pub fn len(&self) -> usize {
        self.states.len() / self.dims
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dims..(i + 1) * self.dims]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.states.chunks_exact(self.dims)
    }

    pub fn states_flat(&self) -> &[f64] {
        &self.states
    }
}

fn reflect(mut x: f64, lo: f64, hi: f64) -> f64 {
    // Fold back into [lo, hi]; the loop handles large excursions.
    for _ in 0..64 {
        if x < lo {
            x = 2.0 * lo - x;
        } else if x > hi {
            x = 2.0 * hi - x;
        } else {
            return x;
        }
    }
    x.clamp(lo, hi)
}

/// Euler-Maruyama integration of dX = -(D·I+Q)∇V dt + √(2D) dW with
/// reflecting boundaries. Deterministic given the seed.
pub fn simulate(
    drift: &DriftSpec,
    x0: &[f64],
    steps: usize,
    dt: f64,
    seed: u64,
) -> Result<Trajectory, DynamicsError> {
    let g = drift.grid();
    let dims = g.dims();
    if x0.len() != dims {
        return Err(DynamicsError::Domain(format!(
            "start point has {} coordinates for a {dims}-dimensional grid",
            x0.len()
        )));
    }
    if !g.contains(x0) {
        return Err(DynamicsError::Domain("start point outside grid".to_string()));
    }
    if !(dt > 0.0) {
        return Err(DynamicsError::Stability("dt must be > 0".to_string()));
    }
    let curvature = drift.max_curvature();
    if curvature > 0.0 && dt > 0.1 / curvature {
        return Err(DynamicsError::Stability(format!(
            "dt {dt} exceeds stability heuristic {} for curvature {curvature}",
            0.1 / curvature
        )));
    }

    let grad = drift.gradient_field();
    let sigma = (2.0 * drift.diffusion() * dt).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = x0.to_vec();
    let mut states = Vec::with_capacity((steps + 1) * dims);
    states.extend_from_slice(&x);
    for _ in 0..steps {
        let d = drift.drift_at(&grad, &x);
        for a in 0..dims {
            let noise: f64 = StandardNormal.sample(&mut rng);
            let next = x[a] + d[a] * dt + sigma * noise;
            x[a] = reflect(next, g.lower(a), g.upper(a));
        }
        states.extend_from_slice(&x);
    }
    Ok(Trajectory {
        states,
        dims,
        dt,
        seed,
    })
}

/// Fraction of post-burn-in samples inside the region.
pub fn occupation_fraction(
    traj: &Trajectory,
    a: &Region,
    burn_in: usize,
) -> Result<f64, DynamicsError> {
    if burn_in >= traj.len() {
        return Err(DynamicsError::Window(format!(
            "burn-in {burn_in} leaves no samples of {}",
            traj.len()
        )));
    }
    let mut hits = 0usize;
    let mut total = 0usize;
    for (i, state) in traj.iter().enumerate() {
        if i < burn_in {
            continue;
        }
        total += 1;
        if a.contains_point(state) {
            hits += 1;
        }
    }
    Ok(hits as f64 / total as f64)
}

/// Histogram estimator: samples binned to their nearest node, counts
/// divided by node control volume, then normalised.
pub fn empirical_density(
    traj: &Trajectory,
    grid: &Grid,
    burn_in: usize,
) -> Result<Density, DynamicsError> {
    if traj.len() < burn_in + 1000 {
        return Err(DynamicsError::Window(format!(
            "need at least 1000 post-burn-in samples, have {}",
            traj.len().saturating_sub(burn_in)
        )));
    }
    if traj.dims() != grid.dims() {
        return Err(DynamicsError::Domain(
            "trajectory and grid dimensions differ".to_string(),
        ));
    }
    let mut counts = vec![0.0_f64; grid.len()];
    for (i, state) in traj.iter().enumerate() {
        if i < burn_in {
            continue;
        }
        counts[grid.nearest(state)] += 1.0;
    }
    let values: Vec<f64> = counts
        .iter()
        .enumerate()
        .map(|(i, c)| c / grid.weight(i))
        .collect();
    Ok(Density::from_unnormalized(grid.clone(), values)?)
}
