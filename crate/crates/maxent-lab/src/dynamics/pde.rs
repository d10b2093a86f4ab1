use crate::core::Density;

use super::{DriftSpec, DynamicsError};

/// Bernoulli function z/(e^z - 1), the exponential-fitting flux weight.
fn bernoulli(z: f64) -> f64 {
    if z.abs() < 1e-5 {
        1.0 - z / 2.0 + z * z / 12.0
    } else {
        z / (z.exp() - 1.0)
    }
}

const MAX_SNAPSHOTS: usize = 512;

/// Explicit finite-volume evolution of the conservative Fokker-Planck
/// equation ∂t p = ∇·(D∇p + p(D·I+Q)∇V) with no-flux boundaries.
///
/// The diffusive-drift flux uses exponential fitting, for which the Gibbs
/// density is an exact discrete fixed point. The solenoidal part is
/// written as p·exp(V) times the curl of the stream function -q·exp(-V)
/// and discretised through cell-centred stream values with the domain
/// boundary held as a streamline, so its discrete divergence vanishes
/// identically whenever p·exp(V) is constant, i.e. at the same fixed
/// point. Returns up to 512 evenly spaced (time, density) snapshots
/// including the initial and final states.
pub fn evolve_fokker_planck(
    p0: &Density,
    drift: &DriftSpec,
    t_final: f64,
    dt: f64,
) -> Result<Vec<(f64, Density)>, DynamicsError> {
    let g = drift.grid();
    if p0.grid() != g {
        return Err(DynamicsError::Domain(
            "initial density lives on a different grid".to_string(),
        ));
    }
    if !(t_final > 0.0) || !(dt > 0.0) {
        return Err(DynamicsError::Domain("t_final and dt must be > 0".to_string()));
    }
    let d = drift.diffusion();
    let h_min = (0..g.dims()).map(|a| g.spacing(a)).fold(f64::INFINITY, f64::min);
    let cfl = h_min * h_min / (2.0 * d * g.dims() as f64);
    if dt > cfl {
        return Err(DynamicsError::Stability(format!(
            "dt {dt} exceeds the diffusive CFL bound {cfl}"
        )));
    }

    let steps = (t_final / dt).ceil() as usize;
    let stride = steps.div_ceil(MAX_SNAPSHOTS - 1).max(1);
    let v = drift.potential_field();
    let v_min = v.iter().cloned().fold(f64::INFINITY, f64::min);

    let mut p = p0.values().to_vec();
    let mut out = Vec::new();
    out.push((0.0, p0.clone()));

    // Precomputed stream values at cell centres for the solenoidal flux.
    let solenoidal = g.dims() == 2 && drift.is_solenoidal();
    let (nx, ny) = if g.dims() == 2 {
        (g.points(0), g.points(1))
    } else {
        (g.points(0), 1)
    };
    let psi: Vec<f64> = if solenoidal {
        let q = drift.q(0, 1);
        (0..(nx - 1) * (ny - 1))
            .map(|c| {
                let (cx, cy) = (c / (ny - 1), c % (ny - 1));
                let vc = (v[g.flat(cx, cy)]
                    + v[g.flat(cx + 1, cy)]
                    + v[g.flat(cx, cy + 1)]
                    + v[g.flat(cx + 1, cy + 1)])
                    / 4.0;
                -q * (-(vc - v_min)).exp()
            })
            .collect()
    } else {
        Vec::new()
    };

    let mut dp = vec![0.0_f64; g.len()];
    for step in 1..=steps {
        dp.iter_mut().for_each(|x| *x = 0.0);

        if g.dims() == 1 {
            let h = g.spacing(0);
            for i in 0..g.len() - 1 {
                let delta = v[i + 1] - v[i];
                let f = d / h * (bernoulli(delta) * p[i] - bernoulli(-delta) * p[i + 1]);
                dp[i] -= f / g.weight(i);
                dp[i + 1] += f / g.weight(i + 1);
            }
        } else {
            let hx = g.spacing(0);
            let hy = g.spacing(1);
            let wx = |ix: usize| if ix == 0 || ix == nx - 1 { hx / 2.0 } else { hx };
            let wy = |iy: usize| if iy == 0 || iy == ny - 1 { hy / 2.0 } else { hy };
            // Diffusive-drift fluxes in x then y.
            for ix in 0..nx - 1 {
                for iy in 0..ny {
                    let l = g.flat(ix, iy);
                    let r = g.flat(ix + 1, iy);
                    let delta = v[r] - v[l];
                    let f = d / hx * (bernoulli(delta) * p[l] - bernoulli(-delta) * p[r]);
                    dp[l] -= f / wx(ix);
                    dp[r] += f / wx(ix + 1);
                }
            }
            for iy in 0..ny - 1 {
                for ix in 0..nx {
                    let b = g.flat(ix, iy);
                    let t = g.flat(ix, iy + 1);
                    let delta = v[t] - v[b];
                    let f = d / hy * (bernoulli(delta) * p[b] - bernoulli(-delta) * p[t]);
                    dp[b] -= f / wy(iy);
                    dp[t] += f / wy(iy + 1);
                }
            }
            if solenoidal {
                let cell = |cx: usize, cy: usize| psi[cx * (ny - 1) + cy];
                let s_at = |idx: usize| p[idx] * (v[idx] - v_min).exp();
                // x-directed flux F = s ∂ψ/∂y through faces (ix+1/2, iy).
                for ix in 0..nx - 1 {
                    for iy in 0..ny {
                        let l = g.flat(ix, iy);
                        let r = g.flat(ix + 1, iy);
                        let s = (s_at(l) + s_at(r)) / 2.0;
                        let dpsi_dy = if iy == 0 {
                            cell(ix, 0) / (hy / 2.0)
                        } else if iy == ny - 1 {
                            -cell(ix, ny - 2) / (hy / 2.0)
                        } else {
                            (cell(ix, iy) - cell(ix, iy - 1)) / hy
                        };
                        let f = s * dpsi_dy;
                        dp[l] -= f / wx(ix);
                        dp[r] += f / wx(ix + 1);
                    }
                }
                // y-directed flux F = -s ∂ψ/∂x through faces (ix, iy+1/2).
                for iy in 0..ny - 1 {
                    for ix in 0..nx {
                        let b = g.flat(ix, iy);
                        let t = g.flat(ix, iy + 1);
                        let s = (s_at(b) + s_at(t)) / 2.0;
                        let dpsi_dx = if ix == 0 {
                            cell(0, iy) / (hx / 2.0)
                        } else if ix == nx - 1 {
                            -cell(nx - 2, iy) / (hx / 2.0)
                        } else {
                            (cell(ix, iy) - cell(ix - 1, iy)) / hx
                        };
                        let f = -s * dpsi_dx;
                        dp[b] -= f / wy(iy);
                        dp[t] += f / wy(iy + 1);
                    }
                }
            }
        }

        for (pi, di) in p.iter_mut().zip(&dp) {
            *pi += dt * di;
            if *pi < 0.0 {
                if *pi < -1e-10 {
                    return Err(DynamicsError::Stability(format!(
                        "negative density {pi} at step {step}"
                    )));
                }
                *pi = 0.0;
            }
        }

        let mass = g.integrate_unchecked(&p);
        if (mass - 1.0).abs() > 1e-6 {
            return Err(DynamicsError::Conservation(format!(
                "mass {mass} at step {step}"
            )));
        }

        if step % stride == 0 || step == steps {
            let t = step as f64 * dt;
            out.push((t, Density::from_unnormalized(g.clone(), p.clone())?));
        }
    }
    Ok(out)
}
