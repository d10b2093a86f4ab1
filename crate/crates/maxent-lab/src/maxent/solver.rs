use nalgebra::{Cholesky, DMatrix, DVector};

use crate::core::{kl_divergence, Density};

use super::{ConstraintSet, MaxEntError};

/// Feasible targets must sit at least this far inside the attainable
/// moment range; boundary targets need infinite multipliers.
const FEASIBILITY_MARGIN: f64 = 1e-9;

/// Result of a dual solve.
#[derive(Debug, Clone)]
pub struct MaxEntSolution {
    pub density: Density,
    pub multipliers: Vec<f64>,
    pub moment_residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Gibbs density exp(-Σ λ_k J_k)/Z for the current multipliers.
///
/// The potential is recentred by its minimum before exponentiation, which
/// is invariant under the gauge freedom of adding constants to J.
pub fn gibbs_density(constraints: &ConstraintSet) -> Result<Density, MaxEntError> {
    let v = constraints.potential();
    let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return Err(MaxEntError::Scaling(
            "potential is unbounded below on the grid".to_string(),
        ));
    }
    let weights: Vec<f64> = v.iter().map(|&x| (-(x - min)).exp()).collect();
    let z = constraints.grid().integrate_unchecked(&weights);
    if !z.is_finite() || z <= 0.0 {
        return Err(MaxEntError::Scaling(format!(
            "partition function {z} after recentring"
        )));
    }
    Ok(Density::from_unnormalized(
        constraints.grid().clone(),
        weights,
    )?)
}

/// The dual (log-partition) objective ln Z(λ) + Σ λ_k C_k, convex in λ
/// with gradient C_k - E[J_k].
pub fn dual_value(constraints: &ConstraintSet) -> Result<f64, MaxEntError> {
    let v = constraints.potential();
    let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return Err(MaxEntError::Scaling(
            "potential is unbounded below on the grid".to_string(),
        ));
    }
    let weights: Vec<f64> = v.iter().map(|&x| (-(x - min)).exp()).collect();
    let z = constraints.grid().integrate_unchecked(&weights);
    if !z.is_finite() || z <= 0.0 {
        return Err(MaxEntError::Scaling(format!(
            "partition function {z} after recentring"
        )));
    }
    let ln_z = z.ln() - min;
    let lambda_dot_c: f64 = constraints
        .multipliers()
        .iter()
        .zip(constraints.targets())
        .map(|(l, c)| l * c)
        .sum();
    Ok(ln_z + lambda_dot_c)
}

fn moments(constraints: &ConstraintSet, p: &Density, indices: &[usize]) -> Vec<f64> {
    indices
        .iter()
        .map(|&k| {
            p.expect(&constraints.constraints()[k].field)
                .expect("constraint field finite")
        })
        .collect()
}

fn covariance(
    constraints: &ConstraintSet,
    p: &Density,
    indices: &[usize],
    means: &[f64],
) -> DMatrix<f64> {
    let k = indices.len();
    let grid = constraints.grid();
    let mut cov = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let fi = &constraints.constraints()[indices[i]].field;
            let fj = &constraints.constraints()[indices[j]].field;
            let mut acc = 0.0;
            for (n, pv) in p.values().iter().enumerate() {
                acc += grid.weight(n) * pv * (fi[n] - means[i]) * (fj[n] - means[j]);
            }
            cov[(i, j)] = acc;
            cov[(j, i)] = acc;
        }
    }
    cov
}

fn check_feasibility(constraints: &ConstraintSet, free: &[usize]) -> Result<(), MaxEntError> {
    for &k in free {
        let c = &constraints.constraints()[k];
        let lo = c.field.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = c.field.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if c.target < lo + FEASIBILITY_MARGIN || c.target > hi - FEASIBILITY_MARGIN {
            return Err(MaxEntError::Infeasible(format!(
                "target {} for constraint {k} outside attainable range ({lo}, {hi})",
                c.target
            )));
        }
    }
    Ok(())
}

/// Solve for multipliers achieving E[J_k] = C_k.
///
/// Newton with backtracking line search on the dual; falls back to a
/// gradient step when the dual Hessian (the constraint covariance) is not
/// positive definite.
pub fn solve(
    constraints: &ConstraintSet,
    tol: f64,
    max_iter: usize,
) -> Result<MaxEntSolution, MaxEntError> {
    if tol <= 0.0 {
        return Err(MaxEntError::Scaling("tol must be > 0".to_string()));
    }
    let free: Vec<usize> = constraints
        .constraints()
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.fixed)
        .map(|(k, _)| k)
        .collect();
    check_feasibility(constraints, &free)?;

    let finish = |set: &ConstraintSet, iterations: usize| -> Result<MaxEntSolution, MaxEntError> {
        let p = gibbs_density(set)?;
        let all: Vec<usize> = (0..set.len()).collect();
        let means = moments(set, &p, &all);
        let moment_residuals: Vec<f64> = set
            .targets()
            .iter()
            .zip(&means)
            .map(|(c, m)| c - m)
            .collect();
        let converged = free
            .iter()
            .all(|&k| moment_residuals[k].abs() < tol);
        Ok(MaxEntSolution {
            density: p,
            multipliers: set.multipliers().to_vec(),
            moment_residuals,
            iterations,
            converged,
        })
    };

    if free.is_empty() {
        return finish(constraints, 0);
    }

    let targets = DVector::from_iterator(
        free.len(),
        free.iter().map(|&k| constraints.constraints()[k].target),
    );
    let mut lambda = DVector::from_iterator(
        free.len(),
        free.iter().map(|&k| constraints.multipliers()[k]),
    );
    let mut work = constraints.clone();
    let set_free = |work: &mut ConstraintSet, lambda: &DVector<f64>| {
        let mut full = work.multipliers().to_vec();
        for (i, &k) in free.iter().enumerate() {
            full[k] = lambda[i];
        }
        work.set_multipliers(&full);
    };
    let mut singular_throughout = true;
    let mut iterations = 0;

    for iter in 0..max_iter {
        iterations = iter;
        set_free(&mut work, &lambda);
        let p = gibbs_density(&work)?;
        let means = moments(&work, &p, &free);
        let grad = &targets - DVector::from_vec(means.clone());
        if grad.iter().map(|g| g.abs()).fold(0.0, f64::max) < tol {
            return finish(&work, iter);
        }

        let hess = covariance(&work, &p, &free, &means);
        let direction = match Cholesky::new(hess.clone()) {
            Some(chol) => {
                singular_throughout = false;
                -chol.solve(&grad)
            }
            // Singular Hessian: plain gradient descent step on the dual.
            None => -grad.clone() / hess.diagonal().amax().max(1.0),
        };

        // Backtracking line search on the dual objective.
        let f0 = dual_value(&work)?;
        let slope: f64 = grad.dot(&direction);
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial = &lambda + step * &direction;
            let mut trial_set = work.clone();
            set_free(&mut trial_set, &trial);
            if let Ok(f) = dual_value(&trial_set) {
                if f <= f0 + 1e-4 * step * slope {
                    lambda = trial;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            // The dual can no longer be decreased in float arithmetic.
            break;
        }
    }

    set_free(&mut work, &lambda);
    let solution = finish(&work, iterations)?;
    if solution.converged {
        return Ok(solution);
    }
    let residuals: Vec<f64> = solution
        .moment_residuals
        .iter()
        .map(|r| r.abs())
        .collect();
    if singular_throughout && free.len() > 1 {
        return Err(MaxEntError::DegenerateConstraint(format!(
            "dual Hessian singular throughout; residuals {residuals:?}"
        )));
    }
    Err(MaxEntError::NonConvergence {
        iterations: max_iter,
        residuals,
    })
}

/// Re-solve under changed constraints, warm-started from the current
/// multipliers, with information-geometric distances between the old and
/// new optima.
#[derive(Debug, Clone)]
pub struct Retarget {
    pub solution: MaxEntSolution,
    /// KL(p_new, p_old).
    pub kl_distance: Option<f64>,
    /// Symmetrised second-order distance, (KL(p,q) + KL(q,p)) / 2... doubled
    /// to match the small-shift Fisher quadratic form.
    pub symmetrized_distance: Option<f64>,
    /// True when either direction of the KL failed on support grounds.
    pub support_limited: bool,
}

pub fn retarget(
    current: &MaxEntSolution,
    new_constraints: &ConstraintSet,
    tol: f64,
) -> Result<Retarget, MaxEntError> {
    if !current.converged {
        return Err(MaxEntError::Scaling(
            "retarget requires a converged current solution".to_string(),
        ));
    }
    let warm = if new_constraints.len() == current.multipliers.len() {
        new_constraints.with_multipliers(&current.multipliers)
    } else {
        new_constraints.clone()
    };
    let solution = solve(&warm, tol, 100)?;
    let forward = kl_divergence(&solution.density, &current.density);
    let backward = kl_divergence(&current.density, &solution.density);
    let support_limited = forward.is_err() || backward.is_err();
    let kl_distance = forward.as_ref().ok().copied();
    let symmetrized_distance = match (&forward, &backward) {
        (Ok(f), Ok(b)) => Some(f + b),
        _ => None,
    };
    Ok(Retarget {
        solution,
        kl_distance,
        symmetrized_distance,
        support_limited,
    })
}
