use super::{CoreError, Density, Grid, Region, SUPPORT_TOL};

// Log floor keeping subnormal tails well-defined.
/// ln with a floor at 1e-300, the 0·ln 0 := 0 convention.
pub fn safe_ln(v: f64) -> f64 {
    v.max(1e-300).ln()
}

/// Differential Shannon entropy, -∫ p ln p, with 0·ln 0 = 0.
pub fn entropy(p: &Density) -> f64 {
    let field: Vec<f64> = p
        .values()
        .iter()
        .map(|&v| if v > 0.0 { -v * v.ln() } else { 0.0 })
        .collect();
    p.grid().integrate_unchecked(&field)
}

/// KL divergence ∫ p ln(p/q) in nats.
///
/// Errors when `p` has mass where `q` has none, signalling the differing
/// supports caveat rather than producing a catastrophic log ratio.
pub fn kl_divergence(p: &Density, q: &Density) -> Result<f64, CoreError> {
    if p.grid() != q.grid() {
        return Err(CoreError::GridMismatch(
            "kl_divergence requires matching grids".to_string(),
        ));
    }
    let mut acc = 0.0;
    for (i, (&pv, &qv)) in p.values().iter().zip(q.values()).enumerate() {
        if pv <= SUPPORT_TOL {
            continue;
        }
        if qv <= SUPPORT_TOL {
            return Err(CoreError::SupportMismatch(format!(
                "p > 0 where q vanishes at node {i}"
            )));
        }
        acc += p.grid().weight(i) * pv * (pv.ln() - qv.ln());
    }
    Ok(acc)
}

/// Per-node gradient of a scalar field: central differences on the
/// interior, one-sided at the boundary. 1D gradients have a zero second
/// component.
pub fn gradient_field(grid: &Grid, field: &[f64]) -> Vec<[f64; 2]> {
    let mut out = vec![[0.0, 0.0]; grid.len()];
    let nx = grid.points(0);
    let hx = grid.spacing(0);
    match grid.dims() {
        1 => {
            for i in 0..nx {
                out[i][0] = diff_1d(field, i, nx, hx, 1);
            }
        }
        _ => {
            let ny = grid.points(1);
            let hy = grid.spacing(1);
            for ix in 0..nx {
                for iy in 0..ny {
                    let idx = grid.flat(ix, iy);
                    out[idx][0] = diff_axis(field, ix, nx, hx, |k| grid.flat(k, iy));
                    out[idx][1] = diff_axis(field, iy, ny, hy, |k| grid.flat(ix, k));
                }
            }
        }
    }
    out
}

fn diff_1d(field: &[f64], i: usize, n: usize, h: f64, stride: usize) -> f64 {
    if i == 0 {
        (field[stride] - field[0]) / h
    } else if i == n - 1 {
        (field[(n - 1) * stride] - field[(n - 2) * stride]) / h
    } else {
        (field[(i + 1) * stride] - field[(i - 1) * stride]) / (2.0 * h)
    }
}

fn diff_axis(field: &[f64], i: usize, n: usize, h: f64, at: impl Fn(usize) -> usize) -> f64 {
    if i == 0 {
        (field[at(1)] - field[at(0)]) / h
    } else if i == n - 1 {
        (field[at(n - 1)] - field[at(n - 2)]) / h
    } else {
        (field[at(i + 1)] - field[at(i - 1)]) / (2.0 * h)
    }
}

/// Relative Fisher information ∫ |∇ ln(p/r)|² p.
pub fn fisher_information(p: &Density, reference: &Density) -> Result<f64, CoreError> {
    if p.grid() != reference.grid() {
        return Err(CoreError::GridMismatch(
            "fisher_information requires matching grids".to_string(),
        ));
    }
    let grid = p.grid();
    // Reference must carry the support on the interior.
    for i in 0..grid.len() {
        let (ix, iy) = grid.unflat(i);
        let interior = ix > 0
            && ix < grid.points(0) - 1
            && (grid.dims() == 1 || (iy > 0 && iy < grid.points(1) - 1));
        if interior && reference.values()[i] <= 0.0 {
            return Err(CoreError::SupportMismatch(format!(
                "reference vanishes on interior node {i}"
            )));
        }
    }
    let log_ratio: Vec<f64> = p
        .values()
        .iter()
        .zip(reference.values())
        .map(|(&pv, &rv)| safe_ln(pv) - safe_ln(rv))
        .collect();
    let grad = gradient_field(grid, &log_ratio);
    let integrand: Vec<f64> = grad
        .iter()
        .zip(p.values())
        .map(|(g, &pv)| (g[0] * g[0] + g[1] * g[1]) * pv)
        .collect();
    Ok(grid.integrate_unchecked(&integrand))
}

/// Marginal of a 2D density along one axis (`axis` is the one kept).
pub fn marginal(joint: &Density, axis: usize) -> Result<Density, CoreError> {
    let grid = joint.grid();
    if grid.dims() != 2 {
        return Err(CoreError::Dimensionality(
            "marginal requires a 2D joint density".to_string(),
        ));
    }
    let (keep, drop) = match axis {
        0 => (0, 1),
        1 => (1, 0),
        _ => {
            return Err(CoreError::Dimensionality(format!(
                "axis must be 0 or 1, got {axis}"
            )))
        }
    };
    let n_keep = grid.points(keep);
    let n_drop = grid.points(drop);
    let h_drop = grid.spacing(drop);
    let mut values = vec![0.0; n_keep];
    for i in 0..n_keep {
        let mut acc = 0.0;
        for j in 0..n_drop {
            let w = if j == 0 || j == n_drop - 1 {
                h_drop / 2.0
            } else {
                h_drop
            };
            let idx = if keep == 0 {
                grid.flat(i, j)
            } else {
                grid.flat(j, i)
            };
            acc += w * joint.values()[idx];
        }
        values[i] = acc;
    }
    let line = Grid::line(grid.lower(keep), grid.upper(keep), n_keep)?;
    Density::from_unnormalized(line, values)
}

/// Mutual information of a 2D joint density, S[x] + S[y] - S[x,y].
pub fn mutual_information(joint: &Density) -> Result<f64, CoreError> {
    if joint.grid().dims() != 2 {
        return Err(CoreError::Dimensionality(
            "mutual_information requires a 2D joint density".to_string(),
        ));
    }
    let mx = marginal(joint, 0)?;
    let my = marginal(joint, 1)?;
    Ok(entropy(&mx) + entropy(&my) - entropy(joint))
}

/// Condition a density on a region: zero outside, renormalised inside.
pub fn restrict(p: &Density, a: &Region) -> Result<Density, CoreError> {
    if p.grid() != a.grid() {
        return Err(CoreError::GridMismatch(
            "restrict requires matching grids".to_string(),
        ));
    }
    // Nodes on the mask boundary are scaled by the ratio of their in-mask
    // control volume to the full trapezoid weight, the grid representation
    // of the cutoff discontinuity. Interior values then renormalise to the
    // exact conditional height.
    let masked: Vec<f64> = p
        .values()
        .iter()
        .enumerate()
        .map(|(i, &v)| v * a.quad_weight(i) / p.grid().weight(i))
        .collect();
    let mass = p.grid().integrate_unchecked(&masked);
    if mass <= SUPPORT_TOL {
        return Err(CoreError::DegenerateRegion(format!(
            "region carries mass {mass}"
        )));
    }
    Density::from_unnormalized(p.grid().clone(), masked)
}

/// Pre-restriction mass of a region under a density.
pub fn region_mass(p: &Density, a: &Region) -> Result<f64, CoreError> {
    if p.grid() != a.grid() {
        return Err(CoreError::GridMismatch(
            "region_mass requires matching grids".to_string(),
        ));
    }
    Ok(p
        .values()
        .iter()
        .enumerate()
        .map(|(i, &v)| v * a.quad_weight(i))
        .sum())
}
