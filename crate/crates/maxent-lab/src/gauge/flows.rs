use crate::dynamics::Trajectory;

use super::{GaugeError, GaugeStructure};

const MAX_DESCENT_STEPS: usize = 200_000;
const DEGENERATE_GRAD: f64 = 1e-10;

/// Gradient descent on J: the flow across level sets toward the local
/// mode of the matter field. Terminates when |∇J| drops below tol.
pub fn vertical_flow(
    gs: &GaugeStructure,
    x0: &[f64],
    step: f64,
    tol: f64,
) -> Result<Trajectory, GaugeError> {
    if step <= 0.0 || tol <= 0.0 {
        return Err(GaugeError::Stability(
            "step and tol must be > 0".to_string(),
        ));
    }
    let dims = gs.grid().dims();
    let mut x = x0.to_vec();
    let mut j_cur = gs.potential_at(&x)?;
    let mut states = x.clone();
    for _ in 0..MAX_DESCENT_STEPS {
        let grad = gs.connection_at(&x)?;
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if norm < tol {
            return Ok(Trajectory::from_states(states, dims, step, 0));
        }
        for (xi, gi) in x.iter_mut().zip(&grad) {
            *xi -= step * gi;
        }
        let j_next = gs.potential_at(&x)?;
        if j_next > j_cur + 1e-12 * j_cur.abs().max(1.0) {
            return Err(GaugeError::Stability(format!(
                "potential rose from {j_cur} to {j_next}; step {step} too large"
            )));
        }
        j_cur = j_next;
        states.extend_from_slice(&x);
    }
    Err(GaugeError::NonConvergence(format!(
        "gradient norm still above {tol} after {MAX_DESCENT_STEPS} steps"
    )))
}

/// Unit-speed motion along the isocontour of J through x0, with one
/// Newton correction along ∇J per step to cancel the O(step²) drift off
/// the level set. Two dimensions only: there the tangent direction is
/// unique up to sign.
pub fn horizontal_flow(
    gs: &GaugeStructure,
    x0: &[f64],
    arc_steps: usize,
    step: f64,
) -> Result<Trajectory, GaugeError> {
    if gs.grid().dims() != 2 {
        return Err(GaugeError::Dimensionality(
            "horizontal flow needs a two-dimensional grid".to_string(),
        ));
    }
    if step <= 0.0 {
        return Err(GaugeError::Stability("step must be > 0".to_string()));
    }
    let j0 = gs.potential_at(x0)?;
    let mut x = x0.to_vec();
    let mut states = x.clone();
    for _ in 0..arc_steps {
        let grad = gs.connection_at(&x)?;
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if norm <= DEGENERATE_GRAD {
            return Err(GaugeError::DegenerateContour(format!(
                "|∇J| = {norm} at {x:?}"
            )));
        }
        x[0] += step * (-grad[1] / norm);
        x[1] += step * (grad[0] / norm);
        // project back onto {J = J(x0)}
        let g2 = gs.connection_at(&x)?;
        let n2 = g2[0] * g2[0] + g2[1] * g2[1];
        if n2.sqrt() <= DEGENERATE_GRAD {
            return Err(GaugeError::DegenerateContour(format!(
                "|∇J| vanished at {x:?} during projection"
            )));
        }
        let excess = (gs.potential_at(&x)? - j0) / n2;
        x[0] -= excess * g2[0];
        x[1] -= excess * g2[1];
        states.extend_from_slice(&x);
    }
    Ok(Trajectory::from_states(states, 2, step, 0))
}
