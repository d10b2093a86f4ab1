use serde::Serialize;

use crate::core::{region_mass, Region};
use crate::dynamics::{simulate, DriftSpec};

use super::{GaugeError, GaugeStructure};

/// Finite-horizon occupation statistics for a candidate attractor
/// region. Re-entry counts stand in for the recurrence argument, which
/// is asymptotic; they are reported, not asserted.
#[derive(Debug, Clone, Serialize)]
pub struct TrappingReport {
    pub outside_fraction: f64,
    pub mean_first_exit: Option<f64>,
    pub n_reentries: usize,
    #[serde(rename = "gibbs_mass_A")]
    pub gibbs_mass_a: f64,
}

/// Run stochastic trajectories from the deepest node of A and measure
/// how much time they spend outside it. A must be a sublevel set of the
/// gauge potential and the drift must descend that same potential.
pub fn trapping_check(
    gs: &GaugeStructure,
    a: &Region,
    drift: &DriftSpec,
    n_traj: usize,
    horizon: f64,
) -> Result<TrappingReport, GaugeError> {
    if n_traj == 0 || horizon <= 0.0 {
        return Err(GaugeError::Domain(
            "need at least one trajectory and a positive horizon".to_string(),
        ));
    }
    if a.grid().len() != gs.grid().len() || a.grid().dims() != gs.grid().dims() {
        return Err(GaugeError::Dimensionality(
            "region grid does not match gauge grid".to_string(),
        ));
    }
    let drift_v = drift.potential_field();
    let gauge_v = gs.potential();
    if drift_v.len() != gauge_v.len()
        || drift_v
            .iter()
            .zip(gauge_v)
            .any(|(a, b)| (a - b).abs() > 1e-12)
    {
        return Err(GaugeError::Domain(
            "drift potential differs from the gauge potential".to_string(),
        ));
    }

    // sublevel validation: every node of A must sit strictly below every
    // node outside it
    let mut max_in = f64::NEG_INFINITY;
    let mut min_out = f64::INFINITY;
    let mut deepest = None;
    for idx in 0..gs.grid().len() {
        let j = gauge_v[idx];
        if a.contains_index(idx) {
            max_in = max_in.max(j);
            if deepest.map_or(true, |(_, best)| j < best) {
                deepest = Some((idx, j));
            }
        } else {
            min_out = min_out.min(j);
        }
    }
    let (start_idx, _) = deepest.ok_or_else(|| {
        GaugeError::RegionShape("region contains no grid nodes".to_string())
    })?;
    if max_in >= min_out - 1e-12 {
        return Err(GaugeError::RegionShape(format!(
            "max J inside ({max_in}) is not below min J outside ({min_out})"
        )));
    }

    let curvature = drift.max_curvature();
    let dt = if curvature > 0.0 {
        (0.1 / curvature).min(horizon)
    } else {
        horizon / 1000.0
    };
    let steps = (horizon / dt).ceil() as usize;
    let x0 = gs.grid().node(start_idx);

    let mut outside_states = 0_usize;
    let mut total_states = 0_usize;
    let mut exit_times = Vec::new();
    let mut n_reentries = 0_usize;
    for seed in 0..n_traj as u64 {
        let traj = simulate(drift, &x0, steps, dt, seed)?;
        let mut was_inside = true;
        let mut exited = false;
        for (k, s) in traj.iter().enumerate() {
            let inside = a.contains_point(s);
            if inside != was_inside {
                if inside {
                    n_reentries += 1;
                } else if !exited {
                    exit_times.push(k as f64 * dt);
                    exited = true;
                }
                was_inside = inside;
            }
            if !inside {
                outside_states += 1;
            }
            total_states += 1;
        }
    }

    Ok(TrappingReport {
        outside_fraction: outside_states as f64 / total_states as f64,
        mean_first_exit: if exit_times.is_empty() {
            None
        } else {
            Some(exit_times.iter().sum::<f64>() / exit_times.len() as f64)
        },
        n_reentries,
        gibbs_mass_a: region_mass(gs.field(), a)?,
    })
}
