//! Implicit pressure, explicit moles, with face coefficients frozen at the
//! start of the step.

use crate::domain::Domain;
use crate::grid::GRAVITY;
use crate::reservoir::{
    mean_density, perforation_active, perforation_head, perforation_mobility, well_rates, Properties,
    ReservoirError, WellTarget, MAXP,
};

use super::Worker;

#[derive(Debug, Clone, Default)]
pub(crate) struct Frozen {
    /// Per connection and phase: `T λ_up`.
    tl: Vec<[f64; MAXP]>,
    /// Per connection and phase: `ξ_up`.
    xi: Vec<[f64; MAXP]>,
    /// Per connection and phase: capillary and gravity part of the potential.
    gterm: Vec<[f64; MAXP]>,
    /// Per perforation (over all wells): cell, rate at the old state and
    /// `∂q/∂P` with mobility frozen.
    perfs: Vec<(usize, [f64; MAXP], [f64; MAXP])>,
}

/// Freezes face and well coefficients from the current (last accepted)
/// state, and records the well BHPs.
pub(crate) fn freeze(w: &mut Worker, dom: &Domain, props: &Properties, p_window: (f64, f64)) -> Result<Frozen, ReservoirError> {
    let vars = &w.vars;
    let np = vars.np;
    let mut fr = Frozen::default();
    for conn in &dom.conns {
        let (a, b) = (conn.a, conn.b);
        let mut tl = [0.0; MAXP];
        let mut xi = [0.0; MAXP];
        let mut gt = [0.0; MAXP];
        for j in 0..np {
            let (rho, _) = mean_density(vars, a, b, j);
            gt[j] = vars.pc[b * np + j] - vars.pc[a * np + j] - rho * GRAVITY * conn.dz;
            let phi = vars.p[b] - vars.p[a] + gt[j];
            let up = if phi > 0.0 { b } else { a };
            tl[j] = conn.trans * vars.lam[up * np + j];
            xi[j] = vars.xi[up * np + j];
        }
        fr.tl.push(tl);
        fr.xi.push(xi);
        fr.gterm.push(gt);
    }
    w.well_q.clear();
    for well in &w.wells {
        let rates = well_rates(well, vars, &props.pvt, p_window, false)?;
        for (k, perf) in well.perfs.iter().enumerate() {
            let mut dq = [0.0; MAXP];
            if let WellTarget::Bhp(b) = well.target {
                let delta = b + perforation_head(well, k) - vars.p[perf.cell];
                if perforation_active(well, delta) {
                    let m = perforation_mobility(well, vars, &props.pvt, k);
                    for i in 0..np {
                        dq[i] = -perf.wi * m[i];
                    }
                }
            }
            fr.perfs.push((perf.cell, rates.q[k], dq));
        }
        w.well_q.push(rates);
    }
    Ok(fr)
}

/// Scalar pressure system from the linearized volume balance, with the
/// transport terms evaluated at the new pressure through frozen
/// coefficients.
pub(crate) fn assemble_pressure(w: &mut Worker, dom: &Domain, fr: &Frozen, dt: f64) {
    let vars = &w.vars;
    let np = vars.np;
    let nv = vars.nv;
    let ni = dom.n_interior();
    w.mat.begin(ni, dom.n_local(), 1);
    let mut diag = vec![0.0; ni];
    let mut rhs: Vec<f64> = (0..ni).map(|c| vars.vf[c] - vars.vp[c]).collect();
    for c in 0..ni {
        diag[c] = vars.dvp_dp[c] - vars.dvf[c * nv];
    }
    let dvf_dn = |c: usize, i: usize| vars.dvf[c * nv + 1 + i];
    for (k, conn) in dom.conns.iter().enumerate() {
        let (a, b) = (conn.a, conn.b);
        for i in 0..np {
            let coef = fr.tl[k][i] * fr.xi[k][i];
            let phi = vars.p[b] - vars.p[a] + fr.gterm[k][i];
            // outflow of a is −coef·Φ, of b is +coef·Φ
            if a < ni {
                let g = dt * dvf_dn(a, i);
                rhs[a] -= g * (-coef * phi);
                diag[a] += g * coef;
                w.mat.add_entry(a, b, 0, 0, -g * coef);
            }
            if b < ni {
                let g = dt * dvf_dn(b, i);
                rhs[b] -= g * (coef * phi);
                diag[b] += g * coef;
                w.mat.add_entry(b, a, 0, 0, -g * coef);
            }
        }
    }
    for &(c, q, dq) in &fr.perfs {
        for i in 0..np {
            let g = dt * dvf_dn(c, i);
            rhs[c] += g * q[i];
            diag[c] -= g * dq[i];
        }
    }
    for c in 0..ni {
        w.mat.add_entry(c, c, 0, 0, diag[c]);
    }
    // scale rows by pore volume
    for c in 0..ni {
        let s = 1.0 / vars.vp[c];
        for v in w.mat.vals[c].iter_mut() {
            *v *= s;
        }
        w.mat.b[c] = rhs[c] * s;
    }
}

/// Explicit mole update from the frozen coefficients at the new pressure.
/// Returns the largest per-phase throughput ratio `dt·outflow_j/(V_p S_j)`.
pub(crate) fn transport(w: &mut Worker, dom: &Domain, fr: &Frozen, dt: f64, neg_rel: f64) -> f64 {
    let np = w.vars.np;
    let ni = dom.n_interior();
    let mut net = vec![0.0; ni * np];
    let mut out_vol = vec![0.0; ni * np];
    {
        let vars = &w.vars;
        for (k, conn) in dom.conns.iter().enumerate() {
            let (a, b) = (conn.a, conn.b);
            for j in 0..np {
                let phi = vars.p[b] - vars.p[a] + fr.gterm[k][j];
                let fv = fr.tl[k][j] * phi;
                let fnm = fr.xi[k][j] * fv;
                if a < ni {
                    net[a * np + j] -= fnm;
                    if fv < 0.0 {
                        out_vol[a * np + j] -= fv;
                    }
                }
                if b < ni {
                    net[b * np + j] += fnm;
                    if fv > 0.0 {
                        out_vol[b * np + j] += fv;
                    }
                }
            }
        }
    }
    let mut k = 0;
    for wi in 0..w.wells.len() {
        for kk in 0..w.wells[wi].perfs.len() {
            let (c, q0, dq) = fr.perfs[k];
            let dp = w.vars.p[c] - w.vars.p_last[c];
            for i in 0..np {
                let q = q0[i] + dq[i] * dp;
                w.well_q[wi].q[kk][i] = q;
                net[c * np + i] -= q;
                if q < 0.0 {
                    out_vol[c * np + i] -= q / w.vars.xi[c * np + i];
                }
            }
            k += 1;
        }
    }
    let mut cfl = 0.0f64;
    let vars = &mut w.vars;
    for c in 0..ni {
        for j in 0..np {
            let s = vars.s_last[c * np + j];
            if s > 0.0 && out_vol[c * np + j] > 0.0 {
                cfl = cfl.max(dt * out_vol[c * np + j] / (vars.vp[c] * s));
            }
        }
        let n = &mut vars.n[c * np..(c + 1) * np];
        for i in 0..np {
            n[i] = vars.n_last[c * np + i] - dt * net[c * np + i];
        }
        super::fim::clamp_moles(n, neg_rel);
    }
    cfl
}
