use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::core::Grid;
use crate::maxent::{solve, ConstraintSet};

use super::sync::build_sync_map;
use super::{AffineMap, BlanketError, Block, GaussianSystem};

const MAX_NEWTON_ITER: usize = 100;

/// Gaussian recognition density over external states. The mean is not
/// stored: internal states parameterize it through the synchronization
/// map, mean = sigma(mu). Only the covariance is a free choice.
#[derive(Debug, Clone)]
pub struct RecognitionDensity {
    pub sigma: AffineMap,
    pub cov: DMatrix<f64>,
}

impl RecognitionDensity {
    /// Recognition covariance set to the true conditional covariance of
    /// the external block given the blanket. This is the choice that
    /// makes the bound tight at the optimum.
    pub fn conditional(sys: &GaussianSystem) -> Result<Self, BlanketError> {
        let sync = build_sync_map(sys)?;
        let cond = sys.condition(Block::B, &sys.block_mean(Block::B)?)?;
        Ok(RecognitionDensity {
            sigma: sync.sigma,
            cov: cond.block_cov(Block::Eta, Block::Eta)?,
        })
    }

    /// A deliberately different covariance; the resulting free energy
    /// upper-bounds the one from the conditional choice.
    pub fn with_cov(sys: &GaussianSystem, cov: DMatrix<f64>) -> Result<Self, BlanketError> {
        let dim = sys.block_dim(Block::Eta)?;
        if cov.nrows() != dim || cov.ncols() != dim {
            return Err(BlanketError::Dimensionality(format!(
                "recognition covariance is {}x{}, external block has dimension {dim}",
                cov.nrows(),
                cov.ncols()
            )));
        }
        let sync = build_sync_map(sys)?;
        Ok(RecognitionDensity {
            sigma: sync.sigma,
            cov,
        })
    }

    pub fn mean_for(&self, mu: &DVector<f64>) -> DVector<f64> {
        self.sigma.apply(mu)
    }
}

/// KL(N(m0, c0) || N(m1, c1)), closed form.
fn gaussian_kl(
    m0: &DVector<f64>,
    c0: &DMatrix<f64>,
    m1: &DVector<f64>,
    c1: &DMatrix<f64>,
) -> Result<f64, BlanketError> {
    let n = m0.len() as f64;
    let chol1 = c1
        .clone()
        .cholesky()
        .ok_or_else(|| BlanketError::Degenerate("KL reference covariance singular".to_string()))?;
    let chol0 = c0
        .clone()
        .cholesky()
        .ok_or_else(|| BlanketError::Degenerate("KL argument covariance singular".to_string()))?;
    let ln_det1 = 2.0 * chol1.l().diagonal().map(f64::ln).sum();
    let ln_det0 = 2.0 * chol0.l().diagonal().map(f64::ln).sum();
    let trace = (chol1.solve(c0)).trace();
    let delta = m1 - m0;
    let quad = delta.dot(&chol1.solve(&delta));
    Ok(0.5 * (trace + quad - n + ln_det1 - ln_det0))
}

/// Free energy of an internal/blanket configuration:
/// F = KL(q(eta; sigma(mu)) || p(eta|b)) - ln p(mu, b).
/// The KL term is the gap above the surprisal bound, returned
/// separately; it is zero exactly when mu is the conditional mean and
/// the recognition covariance is the conditional covariance.
pub fn variational_free_energy(
    sys: &GaussianSystem,
    q: &RecognitionDensity,
    mu: &DVector<f64>,
    b: &DVector<f64>,
) -> Result<(f64, f64), BlanketError> {
    let de = sys.block_dim(Block::Eta)?;
    if q.cov.nrows() != de {
        return Err(BlanketError::Dimensionality(format!(
            "recognition covariance dimension {} does not match external block {de}",
            q.cov.nrows()
        )));
    }
    if mu.len() != sys.block_dim(Block::Mu)? || b.len() != sys.block_dim(Block::B)? {
        return Err(BlanketError::Dimensionality(
            "mu or b length does not match its block".to_string(),
        ));
    }
    let cond = sys.condition(Block::B, b)?;
    let eta_hat = cond.block_mean(Block::Eta)?;
    let cov_eta = cond.block_cov(Block::Eta, Block::Eta)?;
    let q_mean = q.mean_for(mu);
    let gap = gaussian_kl(&q_mean, &q.cov, &eta_hat, &cov_eta)?;
    let f = gap + sys.surprisal_mu_b(mu, b)?;
    Ok((f, gap))
}

fn minimize_from(
    sys: &GaussianSystem,
    b: &DVector<f64>,
    start: DVector<f64>,
    tol: f64,
) -> Result<(DVector<f64>, usize), BlanketError> {
    let q = RecognitionDensity::conditional(sys)?;
    let cond = sys.condition(Block::B, b)?;
    let eta_hat = cond.block_mean(Block::Eta)?;
    let prec_eta = cond
        .block_cov(Block::Eta, Block::Eta)?
        .cholesky()
        .ok_or_else(|| BlanketError::Degenerate("conditional eta covariance singular".to_string()))?
        .inverse();
    let dm = sys.block_dim(Block::Mu)?;
    let db = sys.block_dim(Block::B)?;

    // Joint (mu, b) precision for the surprisal term of the gradient.
    let mut joint = DMatrix::zeros(dm + db, dm + db);
    joint
        .view_mut((0, 0), (dm, dm))
        .copy_from(&sys.block_cov(Block::Mu, Block::Mu)?);
    joint
        .view_mut((0, dm), (dm, db))
        .copy_from(&sys.block_cov(Block::Mu, Block::B)?);
    joint
        .view_mut((dm, 0), (db, dm))
        .copy_from(&sys.block_cov(Block::B, Block::Mu)?);
    joint
        .view_mut((dm, dm), (db, db))
        .copy_from(&sys.block_cov(Block::B, Block::B)?);
    let prec_joint = joint
        .cholesky()
        .ok_or_else(|| BlanketError::Degenerate("joint (mu, b) covariance singular".to_string()))?
        .inverse();

    let s = q.sigma.matrix.clone();
    let hessian = s.transpose() * &prec_eta * &s + prec_joint.view((0, 0), (dm, dm));
    let hess_chol = hessian
        .clone()
        .cholesky()
        .ok_or_else(|| BlanketError::Degenerate("free-energy Hessian not positive definite".to_string()))?;
    let mean_mu = sys.block_mean(Block::Mu)?;
    let mean_b = sys.block_mean(Block::B)?;

    let grad = |mu: &DVector<f64>| -> DVector<f64> {
        let mut z = DVector::zeros(dm + db);
        z.rows_mut(0, dm).copy_from(&(mu - &mean_mu));
        z.rows_mut(dm, db).copy_from(&(b - &mean_b));
        let g_surprisal = (&prec_joint * z).rows(0, dm).into_owned();
        let g_kl = s.transpose() * &prec_eta * (q.mean_for(mu) - &eta_hat);
        g_kl + g_surprisal
    };

    let mut mu = start;
    let mut f_cur = variational_free_energy(sys, &q, &mu, b)?.0;
    for iter in 0..MAX_NEWTON_ITER {
        let g = grad(&mu);
        let step = -hess_chol.solve(&g);
        if step.norm() < tol {
            return Ok((mu, iter));
        }
        let mut alpha = 1.0;
        loop {
            let trial = &mu + alpha * &step;
            let f_trial = variational_free_energy(sys, &q, &trial, b)?.0;
            if f_trial <= f_cur + 1e-14 * f_cur.abs().max(1.0) {
                mu = trial;
                f_cur = f_trial;
                break;
            }
            alpha *= 0.5;
            if alpha < 1e-10 {
                return Err(BlanketError::NonConvergence(format!(
                    "line search stalled at iteration {iter}, |grad| = {:.3e}, F = {f_cur:.6e}",
                    g.norm()
                )));
            }
        }
    }
    let g = grad(&mu);
    if g.norm() < tol {
        return Ok((mu, MAX_NEWTON_ITER));
    }
    Err(BlanketError::NonConvergence(format!(
        "no convergence in {MAX_NEWTON_ITER} iterations, |grad| = {:.3e}, F = {f_cur:.6e}",
        g.norm()
    )))
}

/// Damped Newton descent of F over the internal block with the blanket
/// held fixed; F is quadratic here, so this converges in one undamped
/// step plus float cleanup. The minimizer is the conditional mean of
/// the internal block.
pub fn minimize_free_energy(
    sys: &GaussianSystem,
    b: &DVector<f64>,
    tol: f64,
) -> Result<DVector<f64>, BlanketError> {
    if tol <= 0.0 {
        return Err(BlanketError::NonConvergence("tol must be > 0".to_string()));
    }
    let start = sys.block_mean(Block::Mu)?;
    minimize_from(sys, b, start, tol).map(|(mu, _)| mu)
}

/// Two routes to the same density over the internal block: conditioning
/// on the blanket, and maximum entropy under a mean constraint pulled
/// back through the synchronization map plus the conditional variance.
/// They agree exactly when the blanket really decouples eta from mu.
#[derive(Debug, Clone, Serialize)]
pub struct DualCheckReport {
    pub maxent_mean: f64,
    pub maxent_var: f64,
    pub conditional_mean: f64,
    pub conditional_var: f64,
    pub mean_error: f64,
    pub var_error: f64,
    /// False when either error exceeds 1e-3, the signature of a broken
    /// blanket.
    pub blanket_consistent: bool,
}

const BLANKET_FLAG_TOL: f64 = 1e-3;

pub fn maxent_dual_check(
    sys: &GaussianSystem,
    b: &DVector<f64>,
) -> Result<DualCheckReport, BlanketError> {
    if sys.block_dim(Block::Mu)? != 1 {
        return Err(BlanketError::Dimensionality(
            "dual check requires a scalar internal block".to_string(),
        ));
    }
    let sync = build_sync_map(sys)?;
    let cond = sys.condition(Block::B, b)?;
    let mu_hat = cond.block_mean(Block::Mu)?[0];
    let var_cond = cond.block_cov(Block::Mu, Block::Mu)?[(0, 0)];
    let eta_hat = cond.block_mean(Block::Eta)?;

    // Constraints an internal observer derives through the blanket: the
    // mean pulled back through sigma, and the variance of mu given both
    // the blanket and the external estimate. Under conditional
    // independence the second conditioning is vacuous and both targets
    // reproduce p(mu|b); a direct eta-mu coupling shrinks the variance.
    let target_mean = sync.sigma_inverse(&eta_hat)?[0];
    let target_var = cond
        .condition(Block::Eta, &eta_hat)?
        .block_cov(Block::Mu, Block::Mu)?[(0, 0)];

    let sd = target_var.sqrt();
    let grid = Grid::line(target_mean - 8.0 * sd, target_mean + 8.0 * sd, 2001)?;
    let xs = grid.sample(|x| x[0]);
    let standardized: Vec<f64> = xs.iter().map(|x| (x - target_mean) / sd).collect();
    let sq: Vec<f64> = standardized.iter().map(|u| u * u).collect();
    let mut cs = ConstraintSet::empty(grid);
    // warm start at the standard-normal multipliers; Newton only has to
    // absorb quadrature bias from there
    cs.push_with_multiplier(standardized, 0.0, 0.0)?;
    cs.push_with_multiplier(sq, 1.0, 0.5)?;
    let sol = solve(&cs, 1e-9, 200)?;

    let mean_me = sol.density.expect(&xs)?;
    let sq_abs: Vec<f64> = xs.iter().map(|x| (x - mean_me).powi(2)).collect();
    let var_me = sol.density.expect(&sq_abs)?;

    let mean_error = (mean_me - mu_hat).abs();
    let var_error = (var_me - var_cond).abs();
    Ok(DualCheckReport {
        maxent_mean: mean_me,
        maxent_var: var_me,
        conditional_mean: mu_hat,
        conditional_var: var_cond,
        mean_error,
        var_error,
        blanket_consistent: mean_error <= BLANKET_FLAG_TOL && var_error <= BLANKET_FLAG_TOL,
    })
}

/// Summary of one blanketed system at one blanket value, for JSON
/// emission.
#[derive(Debug, Clone, Serialize)]
pub struct BlanketReport {
    pub mu_hat: Vec<f64>,
    pub eta_hat: Vec<f64>,
    pub sigma_matrix: Vec<Vec<f64>>,
    #[serde(rename = "F_at_opt")]
    pub f_at_opt: f64,
    pub bound_gap: f64,
    pub maxent_match_error: f64,
}

impl BlanketReport {
    pub fn compute(sys: &GaussianSystem, b: &DVector<f64>) -> Result<Self, BlanketError> {
        let q = RecognitionDensity::conditional(sys)?;
        let mu_star = minimize_free_energy(sys, b, 1e-10)?;
        let (f_at_opt, bound_gap) = variational_free_energy(sys, &q, &mu_star, b)?;
        let cond = sys.condition(Block::B, b)?;
        let eta_hat = cond.block_mean(Block::Eta)?;
        let dual = maxent_dual_check(sys, b)?;
        let m = &q.sigma.matrix;
        Ok(BlanketReport {
            mu_hat: mu_star.iter().cloned().collect(),
            eta_hat: eta_hat.iter().cloned().collect(),
            sigma_matrix: (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
                .collect(),
            f_at_opt,
            bound_gap,
            maxent_match_error: dual.mean_error.max(dual.var_error),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::{entropy, Density};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn blanketed_1d(seed: u64) -> GaussianSystem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        GaussianSystem::blanketed(
            DVector::from_element(1, rng.gen_range(-1.0..1.0)),
            DVector::from_element(1, rng.gen_range(-1.0..1.0)),
            DVector::from_element(1, rng.gen_range(-1.0..1.0)),
            DMatrix::from_element(1, 1, rng.gen_range(0.5..2.0)),
            DMatrix::from_element(1, 1, rng.gen_range(0.3..1.5)),
            DMatrix::from_element(1, 1, rng.gen_range(0.3..1.5)),
            DMatrix::from_element(1, 1, rng.gen_range(0.2..1.0)),
            DMatrix::from_element(1, 1, rng.gen_range(0.2..1.0)),
        )
        .unwrap()
    }

    #[test]
    fn gap_vanishes_at_conditional_mean() {
        for seed in 0..20 {
            let sys = blanketed_1d(seed);
            let q = RecognitionDensity::conditional(&sys).unwrap();
            let b = DVector::from_element(1, 0.4 + 0.1 * seed as f64);
            let cond = sys.condition(Block::B, &b).unwrap();
            let mu_hat = cond.block_mean(Block::Mu).unwrap();
            let (f, gap) = variational_free_energy(&sys, &q, &mu_hat, &b).unwrap();
            let surprisal = sys.surprisal_mu_b(&mu_hat, &b).unwrap();
            assert!(gap.abs() < 1e-12, "gap {gap}");
            assert!((f - surprisal).abs() < 1e-12);
        }
    }

    #[test]
    fn bound_chain_holds_over_random_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let sys = blanketed_1d(3);
        let q = RecognitionDensity::conditional(&sys).unwrap();
        let inflated = q.cov.clone() * 2.0;
        let q_tilde = RecognitionDensity::with_cov(&sys, inflated).unwrap();
        for _ in 0..1000 {
            let mu = DVector::from_element(1, rng.gen_range(-3.0..3.0));
            let b = DVector::from_element(1, rng.gen_range(-3.0..3.0));
            let (f, gap) = variational_free_energy(&sys, &q, &mu, &b).unwrap();
            let (f_tilde, _) = variational_free_energy(&sys, &q_tilde, &mu, &b).unwrap();
            let surprisal = sys.surprisal_mu_b(&mu, &b).unwrap();
            assert!(f_tilde >= f - 1e-10);
            assert!(f >= surprisal - 1e-10);
            assert!(gap >= -1e-10);
        }
    }

    #[test]
    fn displaced_mean_gap_is_half_delta_squared() {
        // slope 1 and unit conditional variance by construction
        let sys = GaussianSystem::blanketed(
            DVector::zeros(1),
            DVector::zeros(1),
            DVector::zeros(1),
            DMatrix::from_element(1, 1, 1.3),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 0.7),
        )
        .unwrap();
        let q = RecognitionDensity::conditional(&sys).unwrap();
        let b = DVector::from_element(1, 0.9);
        let mu_hat = sys
            .condition(Block::B, &b)
            .unwrap()
            .block_mean(Block::Mu)
            .unwrap();
        for delta in [0.1, 0.5, 1.7] {
            let mu = &mu_hat + DVector::from_element(1, delta);
            let (_, gap) = variational_free_energy(&sys, &q, &mu, &b).unwrap();
            assert!((gap - delta * delta / 2.0).abs() < 1e-12, "gap {gap}");
        }
    }

    #[test]
    fn minimizer_is_conditional_mean_over_random_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for seed in 0..100 {
            let sys = blanketed_1d(seed);
            let b = DVector::from_element(1, rng.gen_range(-2.0..2.0));
            let mu_star = minimize_free_energy(&sys, &b, 1e-9).unwrap();
            let mu_hat = sys
                .condition(Block::B, &b)
                .unwrap()
                .block_mean(Block::Mu)
                .unwrap();
            assert!((mu_star - mu_hat).abs().max() < 1e-8);
        }
    }

    #[test]
    fn starting_at_optimum_converges_immediately() {
        let sys = blanketed_1d(2);
        let b = DVector::from_element(1, -0.6);
        let mu_hat = sys
            .condition(Block::B, &b)
            .unwrap()
            .block_mean(Block::Mu)
            .unwrap();
        let (mu, iters) = minimize_from(&sys, &b, mu_hat.clone(), 1e-9).unwrap();
        assert!(iters <= 1);
        assert!((mu - mu_hat).abs().max() < 1e-9);
    }

    #[test]
    fn minimum_matches_exhaustive_scan() {
        let sys = blanketed_1d(9);
        let q = RecognitionDensity::conditional(&sys).unwrap();
        let b = DVector::from_element(1, 0.25);
        let mu_star = minimize_free_energy(&sys, &b, 1e-10).unwrap();
        let f_star = variational_free_energy(&sys, &q, &mu_star, &b).unwrap().0;
        let n = 401;
        let spacing = 4.0 / (n - 1) as f64;
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..n {
            let x = mu_star[0] - 2.0 + spacing * i as f64;
            let f = variational_free_energy(&sys, &q, &DVector::from_element(1, x), &b)
                .unwrap()
                .0;
            if f < best.0 {
                best = (f, x);
            }
        }
        assert!(f_star <= best.0 + 1e-12);
        assert!((best.1 - mu_star[0]).abs() <= spacing);
    }

    #[test]
    fn negative_free_energy_decomposes_through_core_functionals() {
        // -F = H(q) + E_q[ln p(eta|b)] - surprisal(mu, b), with the first
        // two terms recomputed by grid quadrature.
        let sys = blanketed_1d(4);
        let q = RecognitionDensity::conditional(&sys).unwrap();
        let b = DVector::from_element(1, 0.8);
        let mu = DVector::from_element(1, 0.3);
        let (f, _) = variational_free_energy(&sys, &q, &mu, &b).unwrap();

        let cond = sys.condition(Block::B, &b).unwrap();
        let eta_hat = cond.block_mean(Block::Eta).unwrap()[0];
        let var_eta = cond.block_cov(Block::Eta, Block::Eta).unwrap()[(0, 0)];
        let q_mean = q.mean_for(&mu)[0];
        let q_sd = q.cov[(0, 0)].sqrt();

        let grid = Grid::line(q_mean - 10.0 * q_sd, q_mean + 10.0 * q_sd, 4001).unwrap();
        let qd = Density::gaussian(grid.clone(), &[q_mean], &[q_sd]).unwrap();
        let h = entropy(&qd);
        let ln_p: Vec<f64> = grid
            .sample(|x| x[0])
            .iter()
            .map(|x| {
                -0.5 * ((x - eta_hat).powi(2) / var_eta
                    + (2.0 * std::f64::consts::PI * var_eta).ln())
            })
            .collect();
        let cross = qd.expect(&ln_p).unwrap();
        let surprisal = sys.surprisal_mu_b(&mu, &b).unwrap();
        assert!((-f - (h + cross - surprisal)).abs() < 1e-9);
    }

    #[test]
    fn dual_check_matches_conditioning_when_blanketed() {
        for seed in 0..10 {
            let sys = blanketed_1d(seed);
            let b = DVector::from_element(1, 0.5 - 0.1 * seed as f64);
            let report = maxent_dual_check(&sys, &b).unwrap();
            assert!(report.mean_error < 1e-8, "mean error {}", report.mean_error);
            assert!(report.var_error < 1e-8, "var error {}", report.var_error);
            assert!(report.blanket_consistent);
        }
    }

    #[test]
    fn dual_check_flags_broken_blanket() {
        let sys = blanketed_1d(6);
        let mut cov = sys.cov().clone();
        // inject a direct eta-mu coupling not mediated by the blanket
        cov[(0, 2)] += 0.1;
        cov[(2, 0)] += 0.1;
        let broken = GaussianSystem::new(sys.mean().clone(), cov, sys.blocks().to_vec()).unwrap();
        let report = maxent_dual_check(&broken, &DVector::from_element(1, 0.7)).unwrap();
        assert!(report.var_error > 1e-3, "var error {}", report.var_error);
        assert!(!report.blanket_consistent);
    }

    #[test]
    fn sync_map_commutes_with_blanket_averaging() {
        let sys = blanketed_1d(8);
        let sync = build_sync_map(&sys).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mean_b = sys.block_mean(Block::B).unwrap()[0];
        let sd_b = sys.block_cov(Block::B, Block::B).unwrap()[(0, 0)].sqrt();
        let n = 10_000;
        let mut acc_mu = DVector::zeros(1);
        let mut acc_eta = DVector::zeros(1);
        for _ in 0..n {
            let b = DVector::from_element(
                1,
                mean_b + sd_b * rng.sample::<f64, _>(rand_distr::StandardNormal),
            );
            acc_mu += sync.bold_mu.apply(&b);
            acc_eta += sync.bold_eta.apply(&b);
        }
        let avg_mu = acc_mu / n as f64;
        let avg_eta = acc_eta / n as f64;
        assert!((sync.sigma.apply(&avg_mu) - avg_eta).abs().max() < 1e-10);
    }

    #[test]
    fn report_serializes_expected_fields() {
        let sys = blanketed_1d(1);
        let report = BlanketReport::compute(&sys, &DVector::from_element(1, 0.2)).unwrap();
        assert!(report.bound_gap.abs() < 1e-10);
        assert!(report.maxent_match_error < 1e-8);
        let json = serde_json::to_value(&report).unwrap();
        for key in [
            "mu_hat",
            "eta_hat",
            "sigma_matrix",
            "F_at_opt",
            "bound_gap",
            "maxent_match_error",
        ] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
    }
}
