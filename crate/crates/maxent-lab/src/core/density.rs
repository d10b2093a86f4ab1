use super::{CoreError, Grid, NORM_TOL};

/// A normalised probability density on a [`Grid`].
///
/// Values are per-node densities (1/state-volume). Construction validates
/// nonnegativity, finiteness, and unit trapezoid mass.
#[derive(Debug, Clone, PartialEq)]
pub struct Density {
    grid: Grid,
    values: Vec<f64>,
}

impl Density {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self, CoreError> {
        if values.len() != grid.len() {
            return Err(CoreError::GridMismatch(format!(
                "{} values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::NumericInput(
                "density contains NaN or Inf".to_string(),
            ));
        }
        if values.iter().any(|v| *v < 0.0) {
            return Err(CoreError::InvariantViolation(
                "density has negative values".to_string(),
            ));
        }
        let mass = grid.integrate_unchecked(&values);
        if (mass - 1.0).abs() > NORM_TOL {
            return Err(CoreError::InvariantViolation(format!(
                "density mass {mass} differs from 1 by more than {NORM_TOL}"
            )));
        }
        Ok(Density { grid, values })
    }

    /// Normalise a nonnegative field into a density.
    pub fn from_unnormalized(grid: Grid, values: Vec<f64>) -> Result<Self, CoreError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::NumericInput(
                "field contains NaN or Inf".to_string(),
            ));
        }
        if values.iter().any(|v| *v < 0.0) {
            return Err(CoreError::InvariantViolation(
                "field has negative values".to_string(),
            ));
        }
        let mass = grid.integrate_unchecked(&values);
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(CoreError::InvariantViolation(format!(
                "cannot normalise field with mass {mass}"
            )));
        }
        let values = values.iter().map(|v| v / mass).collect();
        Ok(Density { grid, values })
    }

    /// Uniform density over the whole grid.
    pub fn uniform(grid: Grid) -> Result<Self, CoreError> {
        let n = grid.len();
        Density::from_unnormalized(grid, vec![1.0; n])
    }

    /// Gaussian density truncated to the grid, renormalised.
    pub fn gaussian(grid: Grid, mean: &[f64], sd: &[f64]) -> Result<Self, CoreError> {
        let dims = grid.dims();
        if mean.len() != dims || sd.len() != dims {
            return Err(CoreError::Dimensionality(
                "mean/sd dimension does not match grid".to_string(),
            ));
        }
        let values = grid.sample(|x| {
            let mut e = 0.0;
            for a in 0..dims {
                let z = (x[a] - mean[a]) / sd[a];
                e += z * z / 2.0;
            }
            (-e).exp()
        });
        Density::from_unnormalized(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mass(&self) -> f64 {
        self.grid.integrate_unchecked(&self.values)
    }

    /// Expectation of a per-node field under this density.
    pub fn expect(&self, field: &[f64]) -> Result<f64, CoreError> {
        let weighted: Vec<f64> = self
            .values
            .iter()
            .zip(field)
            .map(|(p, f)| p * f)
            .collect();
        self.grid.integrate(&weighted)
    }
}
