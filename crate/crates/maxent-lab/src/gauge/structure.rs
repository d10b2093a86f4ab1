use crate::core::{gradient_field, Density, Grid};
use crate::maxent::{gibbs_density, ConstraintSet};

use super::GaugeError;

const STATIONARY_TOL: f64 = 1e-10;

/// A constraint set read geometrically: the combined potential J is the
/// gauge choice, its gradient is the connection one-form, and the Gibbs
/// density exp(-J)/Z is the matter field the connection transports.
#[derive(Debug, Clone)]
pub struct GaugeStructure {
    constraints: ConstraintSet,
    potential: Vec<f64>,
    connection: Vec<Vec<f64>>,
    field: Density,
}

impl GaugeStructure {
    pub fn new(constraints: ConstraintSet) -> Result<Self, GaugeError> {
        let grid = constraints.grid().clone();
        let potential = constraints.potential();
        let per_node = gradient_field(&grid, &potential);
        let mut connection = vec![vec![0.0; grid.len()]; grid.dims()];
        for (i, gv) in per_node.iter().enumerate() {
            for (a, comp) in connection.iter_mut().enumerate() {
                comp[i] = gv[a];
            }
        }
        let field = gibbs_density(&constraints)?;
        Ok(GaugeStructure {
            constraints,
            potential,
            connection,
            field,
        })
    }

    pub fn grid(&self) -> &Grid {
        self.constraints.grid()
    }

    pub fn constraints(&self) -> &ConstraintSet {
        &self.constraints
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    pub fn connection(&self) -> &[Vec<f64>] {
        &self.connection
    }

    pub fn field(&self) -> &Density {
        &self.field
    }

    /// J at an arbitrary point, multilinear.
    pub fn potential_at(&self, x: &[f64]) -> Result<f64, GaugeError> {
        self.check_inside(x)?;
        Ok(self.grid().interpolate(&self.potential, x))
    }

    /// The connection ∇J at an arbitrary point, multilinear per component.
    pub fn connection_at(&self, x: &[f64]) -> Result<Vec<f64>, GaugeError> {
        self.check_inside(x)?;
        Ok(self
            .connection
            .iter()
            .map(|comp| self.grid().interpolate(comp, x))
            .collect())
    }

    fn check_inside(&self, x: &[f64]) -> Result<(), GaugeError> {
        if x.len() != self.grid().dims() {
            return Err(GaugeError::Dimensionality(format!(
                "point has {} coordinates on a {}-dimensional grid",
                x.len(),
                self.grid().dims()
            )));
        }
        if !self.grid().contains(x) {
            return Err(GaugeError::Domain(format!("point {x:?} leaves the grid")));
        }
        Ok(())
    }
}

/// A velocity at a point, resolved against the connection: the vertical
/// part moves across level sets of J, the horizontal part along them.
#[derive(Debug, Clone)]
pub struct GaugeSplit {
    pub point: Vec<f64>,
    pub velocity: Vec<f64>,
    pub vertical: Vec<f64>,
    pub horizontal: Vec<f64>,
    /// |horizontal · ∇J|, the splitting defect.
    pub residual: f64,
    /// Set when ∇J vanished at the point and no vertical direction
    /// exists; the whole velocity is then reported as horizontal.
    pub degenerate: bool,
}

/// Transport a density value along a path by integrating d ln p = -dJ.
/// The one-form is exact, so the integral telescopes to endpoint
/// differences of J; transport is path-independent and loops return the
/// starting value.
pub fn parallel_transport(
    gs: &GaugeStructure,
    path: &[Vec<f64>],
    p_start: f64,
) -> Result<Vec<f64>, GaugeError> {
    if p_start <= 0.0 || !p_start.is_finite() {
        return Err(GaugeError::Domain(format!(
            "transported value must be positive, got {p_start}"
        )));
    }
    if path.is_empty() {
        return Ok(Vec::new());
    }
    let j0 = gs.potential_at(&path[0])?;
    path.iter()
        .map(|x| Ok(p_start * (-(gs.potential_at(x)? - j0)).exp()))
        .collect()
}

/// Orthogonal decomposition of a velocity against span(∇J). At a
/// stationary point of J the split degenerates and is flagged rather
/// than erroring, so flow code can treat modes uniformly.
pub fn split_velocity(
    gs: &GaugeStructure,
    point: &[f64],
    velocity: &[f64],
) -> Result<GaugeSplit, GaugeError> {
    let grad = gs.connection_at(point)?;
    if velocity.len() != grad.len() {
        return Err(GaugeError::Dimensionality(format!(
            "velocity has {} components, grid has {}",
            velocity.len(),
            grad.len()
        )));
    }
    let norm2: f64 = grad.iter().map(|g| g * g).sum();
    if norm2.sqrt() <= STATIONARY_TOL {
        return Ok(GaugeSplit {
            point: point.to_vec(),
            velocity: velocity.to_vec(),
            vertical: vec![0.0; velocity.len()],
            horizontal: velocity.to_vec(),
            residual: 0.0,
            degenerate: true,
        });
    }
    let dot: f64 = velocity.iter().zip(&grad).map(|(v, g)| v * g).sum();
    let scale = dot / norm2;
    let vertical: Vec<f64> = grad.iter().map(|g| scale * g).collect();
    let horizontal: Vec<f64> = velocity
        .iter()
        .zip(&vertical)
        .map(|(v, w)| v - w)
        .collect();
    let residual = horizontal
        .iter()
        .zip(&grad)
        .map(|(h, g)| h * g)
        .sum::<f64>()
        .abs();
    Ok(GaugeSplit {
        point: point.to_vec(),
        velocity: velocity.to_vec(),
        vertical,
        horizontal,
        residual,
        degenerate: false,
    })
}
