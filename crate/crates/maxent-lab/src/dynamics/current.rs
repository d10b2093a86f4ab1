use crate::core::{gradient_field, safe_ln, Density, Grid};

use super::{DriftSpec, DynamicsError};

/// A vector field of probability flux on a grid.
#[derive(Debug, Clone)]
pub struct CurrentField {
    grid: Grid,
    components: Vec<Vec<f64>>,
}

impl CurrentField {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn component(&self, axis: usize) -> &[f64] {
        &self.components[axis]
    }

    pub fn max_norm(&self) -> f64 {
        (0..self.grid.len())
            .map(|i| {
                self.components
                    .iter()
                    .map(|c| c[i] * c[i])
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }
}

fn log_gradient(p: &Density) -> Vec<[f64; 2]> {
    let lp: Vec<f64> = p.values().iter().map(|&v| safe_ln(v)).collect();
    gradient_field(p.grid(), &lp)
}

/// Probability current v = -p(D·I+Q)∇V - D∇p.
///
/// ∇p is evaluated as p·∇ln p with the same difference stencil as ∇V, so
/// for the Gibbs density the equilibrium part cancels node by node and
/// only the solenoidal -pQ∇V survives.
pub fn stationary_current(p: &Density, drift: &DriftSpec) -> Result<CurrentField, DynamicsError> {
    let g = drift.grid();
    if p.grid() != g {
        return Err(DynamicsError::Domain(
            "density lives on a different grid than the drift".to_string(),
        ));
    }
    let dims = g.dims();
    let d = drift.diffusion();
    let a = gradient_field(g, &drift.potential_field());
    let b = log_gradient(p);
    let mut components = vec![vec![0.0; g.len()]; dims];
    for i in 0..g.len() {
        let pv = p.values()[i];
        for (axis, comp) in components.iter_mut().enumerate() {
            let mut qa = 0.0;
            for j in 0..dims {
                qa += drift.q(axis, j) * a[i][j];
            }
            comp[i] = -pv * (d * (a[i][axis] + b[i][axis]) + qa);
        }
    }
    Ok(CurrentField {
        grid: g.clone(),
        components,
    })
}

fn laplacian_term(g: &Grid, f: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; g.len()];
    for axis in 0..g.dims() {
        let n = g.points(axis);
        let h2 = g.spacing(axis) * g.spacing(axis);
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
            for i in 0..n {
                let idx = base + i * stride;
                let second = if i == 0 {
                    (f[idx] - 2.0 * f[idx + stride] + f[idx + 2 * stride]) / h2
                } else if i == n - 1 {
                    (f[idx] - 2.0 * f[idx - stride] + f[idx - 2 * stride]) / h2
                } else {
                    (f[idx + stride] - 2.0 * f[idx] + f[idx - stride]) / h2
                };
                out[idx] += second;
            }
        }
    }
    out
}

/// Divergence of the probability current, expanded by the product rule:
///
///   div v = -p [ D b·(a+b) + b·Qa + D(Δ V + Δ ln p) + tr(Q Hess V) ]
///
/// with a = ∇V and b = ∇ln p on shared stencils. The trace term vanishes
/// identically for antisymmetric Q (both mixed partials share a stencil),
/// so it is dropped; for the Gibbs density b = -a up to rounding and every
/// remaining term cancels, making the equilibrium divergence exact at
/// float precision rather than truncation order.
pub fn current_divergence(p: &Density, drift: &DriftSpec) -> Result<Vec<f64>, DynamicsError> {
    let g = drift.grid();
    if p.grid() != g {
        return Err(DynamicsError::Domain(
            "density lives on a different grid than the drift".to_string(),
        ));
    }
    let dims = g.dims();
    let d = drift.diffusion();
    let v = drift.potential_field();
    let lp: Vec<f64> = p.values().iter().map(|&x| safe_ln(x)).collect();
    let a = gradient_field(g, &v);
    let b = gradient_field(g, &lp);
    let lap_v = laplacian_term(g, &v);
    let lap_lp = laplacian_term(g, &lp);
    let mut out = vec![0.0; g.len()];
    for i in 0..g.len() {
        let mut b_dot = 0.0;
        let mut b_qa = 0.0;
        for axis in 0..dims {
            b_dot += b[i][axis] * (a[i][axis] + b[i][axis]);
            for j in 0..dims {
                b_qa += b[i][axis] * drift.q(axis, j) * a[i][j];
            }
        }
        out[i] = -p.values()[i] * (d * b_dot + b_qa + d * (lap_v[i] + lap_lp[i]));
    }
    Ok(out)
}
