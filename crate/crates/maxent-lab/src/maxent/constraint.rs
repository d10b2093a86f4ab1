use crate::core::{CoreError, Grid, Region};

use super::MaxEntError;

/// Cap on the indicator-complement penalty, just below the exp underflow
/// threshold. Beyond this the Gibbs weight of penalised states is not
/// representable and the same-support assumption behind retarget distances
/// breaks down.
pub const KAPPA_CAP: f64 = 700.0;

/// One constraint: a scalar field J_k on the grid and its target moment C_k.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub field: Vec<f64>,
    pub target: f64,
    /// Fixed constraints keep their multiplier; the solver only adjusts
    /// free ones. Used for penalty terms such as the lariat.
    pub fixed: bool,
}

/// Constraint functions, targets, and multipliers over a shared grid.
///
/// The normalisation constraint is implicit; an empty set denotes the
/// uniform (knowledge-less) case.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet {
    grid: Grid,
    constraints: Vec<Constraint>,
    multipliers: Vec<f64>,
}

impl ConstraintSet {
    pub fn empty(grid: Grid) -> Self {
        ConstraintSet {
            grid,
            constraints: Vec::new(),
            multipliers: Vec::new(),
        }
    }

    /// Add a constraint field with target, initial multiplier zero.
    pub fn push(&mut self, field: Vec<f64>, target: f64) -> Result<(), MaxEntError> {
        self.push_with_multiplier(field, target, 0.0)
    }

    pub fn push_with_multiplier(
        &mut self,
        field: Vec<f64>,
        target: f64,
        multiplier: f64,
    ) -> Result<(), MaxEntError> {
        self.push_inner(field, target, multiplier, false)
    }

    /// Add a penalty term with a pinned multiplier; the solver leaves it
    /// alone.
    pub fn push_fixed(
        &mut self,
        field: Vec<f64>,
        target: f64,
        multiplier: f64,
    ) -> Result<(), MaxEntError> {
        self.push_inner(field, target, multiplier, true)
    }

    fn push_inner(
        &mut self,
        field: Vec<f64>,
        target: f64,
        multiplier: f64,
        fixed: bool,
    ) -> Result<(), MaxEntError> {
        if field.len() != self.grid.len() {
            return Err(CoreError::GridMismatch(format!(
                "constraint field has {} values for {} nodes",
                field.len(),
                self.grid.len()
            ))
            .into());
        }
        if field.iter().any(|v| !v.is_finite()) || !target.is_finite() {
            return Err(CoreError::NumericInput(
                "constraint field or target not finite".to_string(),
            )
            .into());
        }
        self.constraints.push(Constraint {
            field,
            target,
            fixed,
        });
        self.multipliers.push(multiplier);
        Ok(())
    }

    /// J(x) = x (first coordinate).
    pub fn linear(grid: Grid, target: f64) -> Result<Self, MaxEntError> {
        let field = grid.sample(|x| x[0]);
        let mut set = ConstraintSet::empty(grid);
        set.push(field, target)?;
        Ok(set)
    }

    /// J(x) = (x - center)² / scale on the first coordinate.
    pub fn quadratic(grid: Grid, center: f64, scale: f64, target: f64) -> Result<Self, MaxEntError> {
        if scale <= 0.0 {
            return Err(CoreError::NumericInput("quadratic scale must be > 0".to_string()).into());
        }
        let field = grid.sample(|x| (x[0] - center) * (x[0] - center) / scale);
        let mut set = ConstraintSet::empty(grid);
        set.push(field, target)?;
        Ok(set)
    }

    /// J = κ outside the region, 0 inside: the lariat strengthening. κ is
    /// capped at [`KAPPA_CAP`].
    pub fn indicator_complement(region: &Region, kappa: f64) -> Result<Self, MaxEntError> {
        if kappa < 0.0 || !kappa.is_finite() {
            return Err(CoreError::NumericInput("kappa must be finite and >= 0".to_string()).into());
        }
        let kappa = kappa.min(KAPPA_CAP);
        let grid = region.grid().clone();
        let field: Vec<f64> = (0..grid.len())
            .map(|i| if region.contains_index(i) { 0.0 } else { kappa })
            .collect();
        let mut set = ConstraintSet::empty(grid);
        // The lariat enters with a pinned unit multiplier; its target
        // moment is 0 (no occupation of the complement).
        set.push_fixed(field, 0.0, 1.0)?;
        Ok(set)
    }

    /// Append all constraints of `other` (same grid) to this set.
    pub fn extend(&mut self, other: &ConstraintSet) -> Result<(), MaxEntError> {
        if other.grid != self.grid {
            return Err(CoreError::GridMismatch(
                "cannot combine constraint sets on different grids".to_string(),
            )
            .into());
        }
        for (c, &m) in other.constraints.iter().zip(&other.multipliers) {
            self.push_inner(c.field.clone(), c.target, m, c.fixed)?;
        }
        Ok(())
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn multipliers(&self) -> &[f64] {
        &self.multipliers
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.constraints.iter().map(|c| c.target).collect()
    }

    pub fn set_multipliers(&mut self, multipliers: &[f64]) {
        assert_eq!(multipliers.len(), self.constraints.len());
        self.multipliers = multipliers.to_vec();
    }

    pub fn with_multipliers(&self, multipliers: &[f64]) -> Self {
        let mut out = self.clone();
        out.set_multipliers(multipliers);
        out
    }

    /// The combined potential V = Σ λ_k J_k per node.
    pub fn potential(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.grid.len()];
        for (c, &lambda) in self.constraints.iter().zip(&self.multipliers) {
            for (out, j) in v.iter_mut().zip(&c.field) {
                *out += lambda * j;
            }
        }
        v
    }
}
