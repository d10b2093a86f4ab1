use nalgebra::{DMatrix, DVector};

use super::{Block, BlanketError, GaussianSystem};

const INJECTIVITY_TOL: f64 = 1e-8;
const FACTORISATION_TOL: f64 = 1e-10;

/// x ↦ matrix·x + offset.
#[derive(Debug, Clone)]
pub struct AffineMap {
    pub matrix: DMatrix<f64>,
    pub offset: DVector<f64>,
}

impl AffineMap {
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.matrix * x + &self.offset
    }
}

/// The synchronization structure: b ↦ μ̂_b, b ↦ η̂_b, and the composed
/// map σ with σ(μ̂_b) = η̂_b.
#[derive(Debug, Clone)]
pub struct SyncMap {
    pub bold_mu: AffineMap,
    pub bold_eta: AffineMap,
    pub sigma: AffineMap,
    /// Pseudo-inverse of the σ matrix, usable when σ is injective.
    sigma_pinv: Option<DMatrix<f64>>,
}

impl SyncMap {
    /// σ⁻¹(η̂) on the image of σ.
    pub fn sigma_inverse(&self, eta: &DVector<f64>) -> Result<DVector<f64>, BlanketError> {
        let pinv = self.sigma_pinv.as_ref().ok_or_else(|| {
            BlanketError::NonInjectiveSync("sigma has no left inverse".to_string())
        })?;
        Ok(pinv * (eta - &self.sigma.offset))
    }
}

fn pseudo_inverse(m: &DMatrix<f64>, tol: f64) -> Option<DMatrix<f64>> {
    let svd = m.clone().svd(true, true);
    if svd.singular_values.min() <= tol {
        return None;
    }
    svd.pseudo_inverse(tol).ok()
}

/// Build the conditional-expectation maps and factor σ = bold_eta ∘
/// bold_mu⁻¹. Requires bold_mu injective (the footnoted σ⁻¹ failure
/// mode otherwise).
pub fn build_sync_map(sys: &GaussianSystem) -> Result<SyncMap, BlanketError> {
    let s_bb = sys.block_cov(Block::B, Block::B)?;
    let chol = s_bb
        .cholesky()
        .ok_or_else(|| BlanketError::Degenerate("blanket covariance not positive definite".to_string()))?;
    let s_bb_inv = chol.inverse();
    let m_mu = sys.block_cov(Block::Mu, Block::B)? * &s_bb_inv;
    let m_eta = sys.block_cov(Block::Eta, Block::B)? * &s_bb_inv;
    let mean_b = sys.block_mean(Block::B)?;
    let bold_mu = AffineMap {
        offset: sys.block_mean(Block::Mu)? - &m_mu * &mean_b,
        matrix: m_mu,
    };
    let bold_eta = AffineMap {
        offset: sys.block_mean(Block::Eta)? - &m_eta * &mean_b,
        matrix: m_eta,
    };

    let m_mu_pinv = pseudo_inverse(&bold_mu.matrix, INJECTIVITY_TOL).ok_or_else(|| {
        BlanketError::NonInjectiveSync(format!(
            "b -> mu map has minimum singular value <= {INJECTIVITY_TOL}"
        ))
    })?;
    let s = &bold_eta.matrix * &m_mu_pinv;
    // The factorisation exists only if sigma reproduces bold_eta on the
    // image of bold_mu.
    let resid = (&s * &bold_mu.matrix - &bold_eta.matrix).abs().max();
    if resid > FACTORISATION_TOL {
        return Err(BlanketError::NonInjectiveSync(format!(
            "sigma does not factor bold_eta through bold_mu (residual {resid})"
        )));
    }
    let mu_ref = bold_mu.apply(&mean_b);
    let eta_ref = bold_eta.apply(&mean_b);
    let sigma = AffineMap {
        offset: eta_ref - &s * mu_ref,
        matrix: s,
    };
    let sigma_pinv = pseudo_inverse(&sigma.matrix, INJECTIVITY_TOL);
    Ok(SyncMap {
        bold_mu,
        bold_eta,
        sigma,
        sigma_pinv,
    })
}
