use super::{CoreError, Grid};

/// An open subset of states represented as a node mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    grid: Grid,
    mask: Vec<bool>,
}

impl Region {
    pub fn new(grid: Grid, mask: Vec<bool>) -> Result<Self, CoreError> {
        if mask.len() != grid.len() {
            return Err(CoreError::GridMismatch(format!(
                "mask has {} entries for {} nodes",
                mask.len(),
                grid.len()
            )));
        }
        Ok(Region { grid, mask })
    }

    /// The region of nodes satisfying a pointwise predicate.
    pub fn from_predicate(grid: Grid, pred: impl Fn(&[f64]) -> bool) -> Self {
        let mask = (0..grid.len()).map(|i| pred(&grid.node(i))).collect();
        Region { grid, mask }
    }

    /// Axis-aligned box region (inclusive bounds).
    pub fn interval(grid: Grid, lower: &[f64], upper: &[f64]) -> Result<Self, CoreError> {
        if lower.len() != grid.dims() || upper.len() != grid.dims() {
            return Err(CoreError::Dimensionality(
                "region bounds dimension does not match grid".to_string(),
            ));
        }
        let lo = lower.to_vec();
        let hi = upper.to_vec();
        Ok(Region::from_predicate(grid, move |x| {
            x.iter()
                .enumerate()
                .all(|(a, v)| *v >= lo[a] && *v <= hi[a])
        }))
    }

    pub fn full(grid: Grid) -> Self {
        let n = grid.len();
        Region {
            grid,
            mask: vec![true; n],
        }
    }

    pub fn empty(grid: Grid) -> Self {
        let n = grid.len();
        Region {
            grid,
            mask: vec![false; n],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn contains_index(&self, idx: usize) -> bool {
        self.mask[idx]
    }

    /// Membership of an arbitrary point, by nearest node.
    pub fn contains_point(&self, x: &[f64]) -> bool {
        self.grid.contains(x) && self.mask[self.grid.nearest(x)]
    }

    pub fn complement(&self) -> Region {
        Region {
            grid: self.grid.clone(),
            mask: self.mask.iter().map(|m| !m).collect(),
        }
    }

    /// Quadrature weight of a node for integrals over the region.
    ///
    /// Trapezoid weight of the node's in-mask control volume: per axis,
    /// h/2 times the number of in-mask neighbours, so nodes on the mask
    /// boundary carry half weight and the rule stays second order for box
    /// regions. Out-of-mask and isolated nodes weigh zero.
    pub fn quad_weight(&self, idx: usize) -> f64 {
        if !self.mask[idx] {
            return 0.0;
        }
        let g = &self.grid;
        let mut w = 1.0;
        if g.dims() == 1 {
            let mut count = 0.0;
            if idx > 0 && self.mask[idx - 1] {
                count += 1.0;
            }
            if idx + 1 < g.len() && self.mask[idx + 1] {
                count += 1.0;
            }
            w *= g.spacing(0) / 2.0 * count;
        } else {
            let (ix, iy) = g.unflat(idx);
            let mut cx = 0.0;
            if ix > 0 && self.mask[g.flat(ix - 1, iy)] {
                cx += 1.0;
            }
            if ix + 1 < g.points(0) && self.mask[g.flat(ix + 1, iy)] {
                cx += 1.0;
            }
            let mut cy = 0.0;
            if iy > 0 && self.mask[g.flat(ix, iy - 1)] {
                cy += 1.0;
            }
            if iy + 1 < g.points(1) && self.mask[g.flat(ix, iy + 1)] {
                cy += 1.0;
            }
            w *= g.spacing(0) / 2.0 * cx * (g.spacing(1) / 2.0) * cy;
        }
        w
    }

    pub fn node_count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }
}
