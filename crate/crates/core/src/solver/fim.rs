//! Fully implicit residual, Jacobian, update and convergence measures for
//! one worker.

use crate::domain::Domain;
use crate::reservoir::{flash, phase_flux, well_rates, Properties, ReservoirError, MAXV};

use super::Worker;

/// Inputs shared by every worker's assembly.
pub(crate) struct AssemblyCtx<'a> {
    pub props: &'a Properties,
    /// Seconds.
    pub dt: f64,
    pub p_window: (f64, f64),
    /// Per ghost: whether its unknowns are columns of the system.
    pub ghost_dof: &'a [bool],
}

/// Builds residual and Jacobian rows of the interior cells.
///
/// Rows `0..nc` of a cell are `N_i − N_i^n + dt (Σ outflow_i − Q_i)`, row
/// `nc` is `V_f − V_p`; unknowns are `(P, N_0..)`. Rows are scaled by the
/// pore volume (and reference molar density for mass rows) before going
/// into the matrix; `w.res` keeps the unscaled residual.
pub(crate) fn assemble(w: &mut Worker, dom: &Domain, ctx: &AssemblyCtx) -> Result<(), ReservoirError> {
    let vars = &w.vars;
    let np = vars.np;
    let nb = vars.nv;
    let ni = dom.n_interior();
    let nl = dom.n_local();
    let dt = ctx.dt;
    w.mat.begin(ni, nl, nb);
    w.res.clear();
    w.res.resize(ni * nb, 0.0);
    let col_ok = |c: usize| c < ni || ctx.ghost_dof[c - ni];
    let mut blk = vec![0.0; nb * nb];

    for c in 0..ni {
        blk.fill(0.0);
        for i in 0..np {
            w.res[c * nb + i] = vars.n[c * np + i] - vars.n_last[c * np + i];
            blk[i * nb + 1 + i] = 1.0;
        }
        w.res[c * nb + np] = vars.vf[c] - vars.vp[c];
        for v in 0..nb {
            blk[np * nb + v] = vars.dvf[c * nb + v];
        }
        blk[np * nb] -= vars.dvp_dp[c];
        w.mat.add_block(c, c, &blk).expect("block size");
    }

    for conn in &dom.conns {
        let fe = phase_flux(conn, vars, true);
        for (row, sign) in [(conn.a, -1.0), (conn.b, 1.0)] {
            if row >= ni {
                continue;
            }
            for i in 0..np {
                w.res[row * nb + i] += sign * dt * fe.fnc[i];
            }
            for (side, col) in [(0, conn.a), (1, conn.b)] {
                if !col_ok(col) {
                    continue;
                }
                blk.fill(0.0);
                for i in 0..np {
                    for v in 0..nb {
                        blk[i * nb + v] = sign * dt * fe.d[i][side][v];
                    }
                }
                w.mat.add_block(row, col, &blk).expect("block size");
            }
        }
    }

    w.well_q.clear();
    for well in &w.wells {
        let rates = well_rates(well, vars, &ctx.props.pvt, ctx.p_window, true)?;
        let nperf = well.perfs.len();
        for k in 0..nperf {
            let row = well.perfs[k].cell;
            for i in 0..np {
                w.res[row * nb + i] -= dt * rates.q[k][i];
            }
            for l in 0..nperf {
                let d = &rates.dq[k * nperf + l];
                if d.iter().all(|r| r.iter().all(|&x| x == 0.0)) {
                    continue;
                }
                blk.fill(0.0);
                for i in 0..np {
                    for v in 0..nb {
                        blk[i * nb + v] = -dt * d[i][v];
                    }
                }
                w.mat.add_block(row, well.perfs[l].cell, &blk).expect("block size");
            }
        }
        w.well_q.push(rates);
    }

    // row scaling
    w.row_scale.clear();
    for c in 0..ni {
        for e in 0..nb {
            let s = if e < np {
                1.0 / (vars.vp[c] * ctx.props.pvt.xi_ref[e])
            } else {
                1.0 / vars.vp[c]
            };
            w.row_scale.push(s);
        }
    }
    for r in 0..ni {
        let nblk = w.mat.row_len(r);
        for k in 0..nblk {
            for e in 0..nb {
                let s = w.row_scale[r * nb + e];
                for v in 0..nb {
                    w.mat.vals[r][k * nb * nb + e * nb + v] *= s;
                }
            }
        }
        for e in 0..nb {
            w.mat.b[r * nb + e] = -w.res[r * nb + e] * w.row_scale[r * nb + e];
        }
    }
    Ok(())
}

/// Largest scaled mass residual and relative volume-balance residual over
/// the interior cells.
pub(crate) fn residual_norms(w: &Worker, np: usize) -> (f64, f64) {
    let nb = np + 1;
    let mut mass = 0.0f64;
    let mut vol = 0.0f64;
    for (k, (&r, &s)) in w.res.iter().zip(&w.row_scale).enumerate() {
        let v = (r * s).abs();
        let v = if v.is_nan() { f64::INFINITY } else { v };
        if k % nb < np {
            mass = mass.max(v);
        } else {
            vol = vol.max(v);
        }
    }
    (mass, vol)
}

/// Largest damping factor in (0, 1] keeping every interior saturation
/// change of the Newton update within `limit`.
pub(crate) fn chop_factor(w: &Worker, ni: usize, props: &Properties, limit: f64) -> f64 {
    let vars = &w.vars;
    let np = vars.np;
    let nb = vars.nv;
    let u = &w.mat.u;
    let mut omega = 1.0f64;
    let mut n = [0.0; MAXV];
    for c in 0..ni {
        let p = vars.p[c] + u[c * nb];
        for i in 0..np {
            n[i] = vars.n[c * np + i] + u[c * nb + 1 + i];
        }
        let ds = match flash(&props.pvt, p, &n[..np]) {
            Ok(st) => (0..np).map(|j| (st.s[j] - vars.s[c * np + j]).abs()).fold(0.0, f64::max),
            Err(_) => f64::INFINITY,
        };
        if ds > limit {
            omega = omega.min(if ds.is_finite() { limit / ds } else { 0.5 });
        }
    }
    omega
}

/// `x += ω u` on interior cells; moles slightly below zero are clamped.
pub(crate) fn apply_update(w: &mut Worker, ni: usize, omega: f64, neg_rel: f64) {
    let vars = &mut w.vars;
    let np = vars.np;
    let nb = vars.nv;
    let u = &w.mat.u;
    for c in 0..ni {
        vars.p[c] += omega * u[c * nb];
        let n = &mut vars.n[c * np..(c + 1) * np];
        for i in 0..np {
            n[i] += omega * u[c * nb + 1 + i];
        }
        clamp_moles(n, neg_rel);
    }
}

pub(crate) fn clamp_moles(n: &mut [f64], neg_rel: f64) {
    let total: f64 = n.iter().map(|v| v.abs()).sum();
    for v in n.iter_mut() {
        if *v < 0.0 && *v >= -neg_rel * total {
            *v = 0.0;
        }
    }
}

/// Replaces interior moles by the exact backward-Euler balance of the
/// current fluxes and well rates, so accepted steps conserve mass to
/// round-off.
pub(crate) fn finalize(w: &mut Worker, ni: usize, neg_rel: f64) {
    let np = w.vars.np;
    let nb = w.vars.nv;
    for c in 0..ni {
        let n = &mut w.vars.n[c * np..(c + 1) * np];
        for i in 0..np {
            n[i] -= w.res[c * nb + i];
        }
        clamp_moles(n, neg_rel);
    }
}
