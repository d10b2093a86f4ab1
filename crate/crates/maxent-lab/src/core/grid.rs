use serde::{Deserialize, Serialize};

use super::CoreError;

/// A uniform rectangular grid in one or two dimensions.
///
/// Nodes are stored flat; in 2D the flat index is `ix * ny + iy` (row-major
/// in the first axis). Quadrature weights are trapezoid: full cell volume on
/// interior nodes, halved per boundary axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    lower: Vec<f64>,
    upper: Vec<f64>,
    points: Vec<usize>,
}

impl Grid {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, points: Vec<usize>) -> Result<Self, CoreError> {
        let dims = points.len();
        if dims == 0 || dims > 2 || lower.len() != dims || upper.len() != dims {
            return Err(CoreError::Dimensionality(format!(
                "grid must be 1D or 2D with matching bounds, got {} axes",
                dims
            )));
        }
        for axis in 0..dims {
            if !lower[axis].is_finite() || !upper[axis].is_finite() {
                return Err(CoreError::NumericInput(format!(
                    "non-finite bound on axis {axis}"
                )));
            }
            if upper[axis] <= lower[axis] {
                return Err(CoreError::InvariantViolation(format!(
                    "upper bound must exceed lower bound on axis {axis}"
                )));
            }
            if points[axis] < 8 {
                return Err(CoreError::InvariantViolation(format!(
                    "need at least 8 points per axis, got {} on axis {axis}",
                    points[axis]
                )));
            }
        }
        Ok(Grid {
            lower,
            upper,
            points,
        })
    }

    pub fn line(lower: f64, upper: f64, points: usize) -> Result<Self, CoreError> {
        Grid::new(vec![lower], vec![upper], vec![points])
    }

    pub fn rect(
        lower: [f64; 2],
        upper: [f64; 2],
        points: [usize; 2],
    ) -> Result<Self, CoreError> {
        Grid::new(lower.to_vec(), upper.to_vec(), points.to_vec())
    }

    pub fn dims(&self) -> usize {
        self.points.len()
    }

    /// Total node count.
    pub fn len(&self) -> usize {
        self.points.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn points(&self, axis: usize) -> usize {
        self.points[axis]
    }

    pub fn lower(&self, axis: usize) -> f64 {
        self.lower[axis]
    }

    pub fn upper(&self, axis: usize) -> f64 {
        self.upper[axis]
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.upper[axis] - self.lower[axis]) / (self.points[axis] - 1) as f64
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        self.lower[axis] + self.spacing(axis) * i as f64
    }

    /// Flat index from per-axis indices. 1D callers pass `iy = 0`.
    pub fn flat(&self, ix: usize, iy: usize) -> usize {
        match self.dims() {
            1 => ix,
            _ => ix * self.points[1] + iy,
        }
    }

    /// Per-axis indices from a flat index.
    pub fn unflat(&self, idx: usize) -> (usize, usize) {
        match self.dims() {
            1 => (idx, 0),
            _ => (idx / self.points[1], idx % self.points[1]),
        }
    }

    /// Node coordinates for a flat index.
    pub fn node(&self, idx: usize) -> Vec<f64> {
        let (ix, iy) = self.unflat(idx);
        match self.dims() {
            1 => vec![self.coord(0, ix)],
            _ => vec![self.coord(0, ix), self.coord(1, iy)],
        }
    }

    /// Trapezoid quadrature weight of a node.
    pub fn weight(&self, idx: usize) -> f64 {
        let (ix, iy) = self.unflat(idx);
        let mut w = self.axis_weight(0, ix);
        if self.dims() == 2 {
            w *= self.axis_weight(1, iy);
        }
        w
    }

    fn axis_weight(&self, axis: usize, i: usize) -> f64 {
        let h = self.spacing(axis);
        if i == 0 || i == self.points[axis] - 1 {
            h / 2.0
        } else {
            h
        }
    }

    /// Total volume of the domain.
    pub fn volume(&self) -> f64 {
        (0..self.dims())
            .map(|a| self.upper[a] - self.lower[a])
            .product()
    }

    /// Trapezoid-rule integral of a scalar field given per node.
    pub fn integrate(&self, field: &[f64]) -> Result<f64, CoreError> {
        if field.len() != self.len() {
            return Err(CoreError::GridMismatch(format!(
                "field has {} values, grid has {} nodes",
                field.len(),
                self.len()
            )));
        }
        if field.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::NumericInput(
                "field contains NaN or Inf".to_string(),
            ));
        }
        Ok(self.integrate_unchecked(field))
    }

    pub(crate) fn integrate_unchecked(&self, field: &[f64]) -> f64 {
        field
            .iter()
            .enumerate()
            .map(|(i, v)| v * self.weight(i))
            .sum()
    }

    /// Evaluate a function on every node.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        (0..self.len()).map(|i| f(&self.node(i))).collect()
    }

    /// True when `x` lies within the bounds on every axis.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dims()
            && (0..self.dims()).all(|a| x[a] >= self.lower[a] && x[a] <= self.upper[a])
    }

    /// Flat index of the nearest node to `x`.
    pub fn nearest(&self, x: &[f64]) -> usize {
        let clamp = |axis: usize, v: f64| -> usize {
            let i = ((v - self.lower[axis]) / self.spacing(axis)).round();
            (i.max(0.0) as usize).min(self.points[axis] - 1)
        };
        match self.dims() {
            1 => clamp(0, x[0]),
            _ => self.flat(clamp(0, x[0]), clamp(1, x[1])),
        }
    }

    /// Multilinear interpolation of a node field at an arbitrary point.
    pub fn interpolate(&self, field: &[f64], x: &[f64]) -> f64 {
        match self.dims() {
            1 => {
                let (i, t) = self.cell(0, x[0]);
                field[i] * (1.0 - t) + field[i + 1] * t
            }
            _ => {
                let (ix, tx) = self.cell(0, x[0]);
                let (iy, ty) = self.cell(1, x[1]);
                let f00 = field[self.flat(ix, iy)];
                let f10 = field[self.flat(ix + 1, iy)];
                let f01 = field[self.flat(ix, iy + 1)];
                let f11 = field[self.flat(ix + 1, iy + 1)];
                f00 * (1.0 - tx) * (1.0 - ty)
                    + f10 * tx * (1.0 - ty)
                    + f01 * (1.0 - tx) * ty
                    + f11 * tx * ty
            }
        }
    }

    fn cell(&self, axis: usize, v: f64) -> (usize, f64) {
        let h = self.spacing(axis);
        let s = ((v - self.lower[axis]) / h).clamp(0.0, (self.points[axis] - 1) as f64);
        let i = (s.floor() as usize).min(self.points[axis] - 2);
        (i, s - i as f64)
    }
}
