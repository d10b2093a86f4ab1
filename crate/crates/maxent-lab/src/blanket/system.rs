use nalgebra::{DMatrix, DVector};

use super::BlanketError;

/// Block labels of the particular partition, in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    /// External states η.
    Eta,
    /// Blanket states b.
    B,
    /// Internal states μ.
    Mu,
}

/// A joint Gaussian over ordered blocks (η, b, μ), or over whatever
/// blocks remain after conditioning.
#[derive(Debug, Clone)]
pub struct GaussianSystem {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    blocks: Vec<(Block, usize)>,
}

const SYM_TOL: f64 = 1e-12;
const EIG_FLOOR: f64 = 1e-10;

impl GaussianSystem {
    pub fn new(
        mean: DVector<f64>,
        cov: DMatrix<f64>,
        blocks: Vec<(Block, usize)>,
    ) -> Result<Self, BlanketError> {
        let n: usize = blocks.iter().map(|(_, d)| d).sum();
        if blocks.iter().any(|(_, d)| *d == 0) {
            return Err(BlanketError::Dimensionality(
                "every block needs dimension >= 1".to_string(),
            ));
        }
        if mean.len() != n || cov.nrows() != n || cov.ncols() != n {
            return Err(BlanketError::Dimensionality(format!(
                "blocks total {n}, mean has {}, covariance is {}x{}",
                mean.len(),
                cov.nrows(),
                cov.ncols()
            )));
        }
        let asym = (&cov - cov.transpose()).abs().max();
        if asym > SYM_TOL {
            return Err(BlanketError::Degenerate(format!(
                "covariance asymmetry {asym}"
            )));
        }
        let eig = cov.clone().symmetric_eigen();
        let min_eig = eig.eigenvalues.min();
        if min_eig <= EIG_FLOOR {
            return Err(BlanketError::Degenerate(format!(
                "minimum covariance eigenvalue {min_eig}"
            )));
        }
        Ok(GaussianSystem { mean, cov, blocks })
    }

    /// Blanketed generator: b ~ N(mean_b, cov_b); η = R_η b + ε_η and
    /// μ = R_μ b + ε_μ with independent Gaussian residuals, which forces
    /// p(η|μ,b) = p(η|b) by construction (the η-μ cross block becomes
    /// exactly Σ_ηb Σ_bb⁻¹ Σ_bμ).
    #[allow(clippy::too_many_arguments)]
    pub fn blanketed(
        mean_eta: DVector<f64>,
        mean_b: DVector<f64>,
        mean_mu: DVector<f64>,
        cov_b: DMatrix<f64>,
        r_eta: DMatrix<f64>,
        r_mu: DMatrix<f64>,
        residual_eta: DMatrix<f64>,
        residual_mu: DMatrix<f64>,
    ) -> Result<Self, BlanketError> {
        let (ne, nb, nm) = (mean_eta.len(), mean_b.len(), mean_mu.len());
        if r_eta.nrows() != ne
            || r_eta.ncols() != nb
            || r_mu.nrows() != nm
            || r_mu.ncols() != nb
            || cov_b.nrows() != nb
            || residual_eta.nrows() != ne
            || residual_mu.nrows() != nm
        {
            return Err(BlanketError::Dimensionality(
                "blanketed generator shapes inconsistent".to_string(),
            ));
        }
        let s_eb = &r_eta * &cov_b;
        let s_mb = &r_mu * &cov_b;
        let s_ee = &r_eta * &cov_b * r_eta.transpose() + &residual_eta;
        let s_mm = &r_mu * &cov_b * r_mu.transpose() + &residual_mu;
        let s_em = &r_eta * &cov_b * r_mu.transpose();
        let n = ne + nb + nm;
        let mut cov = DMatrix::zeros(n, n);
        cov.view_mut((0, 0), (ne, ne)).copy_from(&s_ee);
        cov.view_mut((0, ne), (ne, nb)).copy_from(&s_eb);
        cov.view_mut((ne, 0), (nb, ne)).copy_from(&s_eb.transpose());
        cov.view_mut((ne, ne), (nb, nb)).copy_from(&cov_b);
        cov.view_mut((0, ne + nb), (ne, nm)).copy_from(&s_em);
        cov.view_mut((ne + nb, 0), (nm, ne))
            .copy_from(&s_em.transpose());
        cov.view_mut((ne, ne + nb), (nb, nm))
            .copy_from(&s_mb.transpose());
        cov.view_mut((ne + nb, ne), (nm, nb)).copy_from(&s_mb);
        cov.view_mut((ne + nb, ne + nb), (nm, nm)).copy_from(&s_mm);
        // Exact symmetry despite float products.
        let cov = (&cov + cov.transpose()) * 0.5;
        let mut mean = DVector::zeros(n);
        mean.rows_mut(0, ne).copy_from(&mean_eta);
        mean.rows_mut(ne, nb).copy_from(&mean_b);
        mean.rows_mut(ne + nb, nm).copy_from(&mean_mu);
        GaussianSystem::new(
            mean,
            cov,
            vec![(Block::Eta, ne), (Block::B, nb), (Block::Mu, nm)],
        )
    }

    pub fn blocks(&self) -> &[(Block, usize)] {
        &self.blocks
    }

    fn block_range(&self, block: Block) -> Result<(usize, usize), BlanketError> {
        let mut offset = 0;
        for (name, dim) in &self.blocks {
            if *name == block {
                return Ok((offset, *dim));
            }
            offset += dim;
        }
        Err(BlanketError::Dimensionality(format!(
            "system has no {block:?} block"
        )))
    }

    pub fn block_dim(&self, block: Block) -> Result<usize, BlanketError> {
        Ok(self.block_range(block)?.1)
    }

    pub fn block_mean(&self, block: Block) -> Result<DVector<f64>, BlanketError> {
        let (o, d) = self.block_range(block)?;
        Ok(self.mean.rows(o, d).into_owned())
    }

    pub fn block_cov(&self, a: Block, b: Block) -> Result<DMatrix<f64>, BlanketError> {
        let (oa, da) = self.block_range(a)?;
        let (ob, db) = self.block_range(b)?;
        Ok(self.cov.view((oa, ob), (da, db)).into_owned())
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Condition on one block taking a given value; returns the Gaussian
    /// over the remaining blocks via the Schur complement.
    pub fn condition(&self, block: Block, value: &DVector<f64>) -> Result<Self, BlanketError> {
        let (ob, db) = self.block_range(block)?;
        if value.len() != db {
            return Err(BlanketError::Dimensionality(format!(
                "value has {} coordinates, block {block:?} has {db}",
                value.len()
            )));
        }
        let rest: Vec<(Block, usize)> = self
            .blocks
            .iter()
            .filter(|(name, _)| *name != block)
            .cloned()
            .collect();
        if rest.is_empty() {
            return Err(BlanketError::Dimensionality(
                "cannot condition away the whole system".to_string(),
            ));
        }
        let rest_idx: Vec<usize> = (0..self.mean.len())
            .filter(|i| *i < ob || *i >= ob + db)
            .collect();
        let nr = rest_idx.len();
        let mut s_rr = DMatrix::zeros(nr, nr);
        let mut s_rb = DMatrix::zeros(nr, db);
        for (i, &gi) in rest_idx.iter().enumerate() {
            for (j, &gj) in rest_idx.iter().enumerate() {
                s_rr[(i, j)] = self.cov[(gi, gj)];
            }
            for j in 0..db {
                s_rb[(i, j)] = self.cov[(gi, ob + j)];
            }
        }
        let s_bb = self.cov.view((ob, ob), (db, db)).into_owned();
        let chol = s_bb.cholesky().ok_or_else(|| {
            BlanketError::Degenerate(format!("{block:?} block covariance not positive definite"))
        })?;
        let gain = &s_rb * chol.inverse();
        let mean_r = DVector::from_iterator(nr, rest_idx.iter().map(|&i| self.mean[i]));
        let delta = value - self.mean.rows(ob, db).into_owned();
        let cond_mean = mean_r + &gain * delta;
        let cond_cov = &s_rr - &gain * s_rb.transpose();
        let cond_cov = (&cond_cov + cond_cov.transpose()) * 0.5;
        GaussianSystem {
            mean: cond_mean,
            cov: cond_cov,
            blocks: rest,
        }
        .validated()
    }

    fn validated(self) -> Result<Self, BlanketError> {
        GaussianSystem::new(self.mean, self.cov, self.blocks)
    }

    /// -ln of the joint density of the (μ, b) blocks at the given values.
    pub fn surprisal_mu_b(
        &self,
        mu: &DVector<f64>,
        b: &DVector<f64>,
    ) -> Result<f64, BlanketError> {
        let (om, dm) = self.block_range(Block::Mu)?;
        let (ob, db) = self.block_range(Block::B)?;
        let idx: Vec<usize> = (om..om + dm).chain(ob..ob + db).collect();
        let n = idx.len();
        let mut cov = DMatrix::zeros(n, n);
        for (i, &gi) in idx.iter().enumerate() {
            for (j, &gj) in idx.iter().enumerate() {
                cov[(i, j)] = self.cov[(gi, gj)];
            }
        }
        let mean = DVector::from_iterator(n, idx.iter().map(|&i| self.mean[i]));
        let mut x = DVector::zeros(n);
        x.rows_mut(0, dm).copy_from(mu);
        x.rows_mut(dm, db).copy_from(b);
        gaussian_surprisal(&x, &mean, &cov)
    }
}

/// -ln N(x; mean, cov).
pub(crate) fn gaussian_surprisal(
    x: &DVector<f64>,
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
) -> Result<f64, BlanketError> {
    let n = x.len() as f64;
    let chol = cov
        .clone()
        .cholesky()
        .ok_or_else(|| BlanketError::Degenerate("covariance not positive definite".to_string()))?;
    let ln_det = 2.0 * chol.l().diagonal().map(f64::ln).sum();
    let delta = x - mean;
    let quad = delta.dot(&chol.solve(&delta));
    Ok(0.5 * (n * (2.0 * std::f64::consts::PI).ln() + ln_det + quad))
}
