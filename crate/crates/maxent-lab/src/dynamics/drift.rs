use crate::core::Grid;
use crate::maxent::ConstraintSet;

use super::DynamicsError;

/// Drift specification: potential V = Σ λ_k J_k from a constraint set,
/// a constant antisymmetric solenoidal matrix Q, and scalar diffusion D.
///
/// The process is dX = -(D·I + Q)∇V dt + √(2D) dW, whose stationary
/// density exp(-V)/Z is independent of both D and Q.
#[derive(Debug, Clone)]
pub struct DriftSpec {
    potential: ConstraintSet,
    q: Vec<f64>,
    diffusion: f64,
}

impl DriftSpec {
    pub fn new(
        potential: ConstraintSet,
        q: &[f64],
        diffusion: f64,
    ) -> Result<Self, DynamicsError> {
        let dims = potential.grid().dims();
        if q.len() != dims * dims {
            return Err(DynamicsError::Domain(format!(
                "Q has {} entries for a {dims}-dimensional grid",
                q.len()
            )));
        }
        for i in 0..dims {
            for j in 0..dims {
                let a = q[i * dims + j];
                if !a.is_finite() {
                    return Err(DynamicsError::Domain("Q entries must be finite".to_string()));
                }
                if a + q[j * dims + i] != 0.0 {
                    return Err(DynamicsError::Domain(
                        "Q must be exactly antisymmetric".to_string(),
                    ));
                }
            }
        }
        if !(diffusion > 0.0) || !diffusion.is_finite() {
            return Err(DynamicsError::Domain("diffusion must be > 0".to_string()));
        }
        Ok(DriftSpec {
            potential,
            q: q.to_vec(),
            diffusion,
        })
    }

    /// Gradient-only drift, Q = 0.
    pub fn gradient(potential: ConstraintSet, diffusion: f64) -> Result<Self, DynamicsError> {
        let dims = potential.grid().dims();
        DriftSpec::new(potential, &vec![0.0; dims * dims], diffusion)
    }

    pub fn grid(&self) -> &Grid {
        self.potential.grid()
    }

    pub fn potential(&self) -> &ConstraintSet {
        &self.potential
    }

    pub fn diffusion(&self) -> f64 {
        self.diffusion
    }

    pub fn q(&self, i: usize, j: usize) -> f64 {
        self.q[i * self.grid().dims() + j]
    }

    pub fn is_solenoidal(&self) -> bool {
        self.q.iter().any(|&v| v != 0.0)
    }

    /// V sampled on the grid.
    pub fn potential_field(&self) -> Vec<f64> {
        self.potential.potential()
    }

    /// ∇V per node as one component vector per axis, central differences
    /// inside, one-sided at the edges.
    pub fn gradient_field(&self) -> Vec<Vec<f64>> {
        let g = self.grid();
        let v = self.potential_field();
        let per_node = crate::core::gradient_field(g, &v);
        let mut comps = vec![vec![0.0; g.len()]; g.dims()];
        for (i, gv) in per_node.iter().enumerate() {
            for (a, comp) in comps.iter_mut().enumerate() {
                comp[i] = gv[a];
            }
        }
        comps
    }

    /// Largest absolute second difference of V, the curvature scale used
    /// by the SDE step-size heuristic.
    pub fn max_curvature(&self) -> f64 {
        let g = self.grid();
        let v = self.potential_field();
        let mut max = 0.0_f64;
        for axis in 0..g.dims() {
            let h2 = g.spacing(axis) * g.spacing(axis);
            let n = g.points(axis);
            let stride = if g.dims() == 1 {
                1
            } else if axis == 0 {
                g.points(1)
            } else {
                1
            };
            let lines = g.len() / n;
            for line in 0..lines {
                let base = if g.dims() == 1 {
                    0
                } else if axis == 0 {
                    line
                } else {
                    line * n
                };
                for i in 1..n - 1 {
                    let idx = base + i * stride;
                    let second =
                        (v[idx + stride] - 2.0 * v[idx] + v[idx - stride]) / h2;
                    max = max.max(second.abs());
                }
            }
        }
        max
    }

    /// -(D·I + Q)∇V at an arbitrary point, by multilinear interpolation of
    /// the sampled gradient.
    pub fn drift_at(&self, grad: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        let g = self.grid();
        let dims = g.dims();
        let gv: Vec<f64> = (0..dims).map(|a| g.interpolate(&grad[a], x)).collect();
        (0..dims)
            .map(|i| {
                let mut acc = -self.diffusion * gv[i];
                for (j, &gvj) in gv.iter().enumerate() {
                    acc -= self.q[i * dims + j] * gvj;
                }
                acc
            })
            .collect()
    }
}
