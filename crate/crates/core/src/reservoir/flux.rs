use crate::grid::{Connection, GRAVITY};

use super::{BulkVarSet, MAXP, MAXV};

/// Phase and component fluxes across one connection, positive into `a`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FluxEval {
    /// Volumetric phase flux (m³/s at reservoir conditions).
    pub fv: [f64; MAXP],
    /// Molar component flux (mol/s).
    pub fnc: [f64; MAXP],
    pub upstream_b: [bool; MAXP],
    /// `d[i][side][v]`: derivative of `fnc[i]` with respect to unknown `v`
    /// of cell `a` (side 0) or `b` (side 1).
    pub d: [[[f64; MAXV]; 2]; MAXP],
}

/// Mean density for the gravity term with `dρ̄/dP` on each side; a phase
/// absent on one side takes the other side's density.
pub fn mean_density(vars: &BulkVarSet, a: usize, b: usize, j: usize) -> (f64, [f64; 2]) {
    let np = vars.np;
    let (ia, ib) = (a * np + j, b * np + j);
    let pa = vars.s[ia] > 0.0;
    let pb = vars.s[ib] > 0.0;
    match (pa, pb) {
        (true, false) => (vars.rho[ia], [vars.drho_dp[ia], 0.0]),
        (false, true) => (vars.rho[ib], [0.0, vars.drho_dp[ib]]),
        _ => (
            0.5 * (vars.rho[ia] + vars.rho[ib]),
            [0.5 * vars.drho_dp[ia], 0.5 * vars.drho_dp[ib]],
        ),
    }
}

/// Potential difference `Φ_j` driving phase `j` from `b` to `a`.
pub fn potential(vars: &BulkVarSet, conn: &Connection, j: usize) -> f64 {
    let np = vars.np;
    let (a, b) = (conn.a, conn.b);
    let (rho, _) = mean_density(vars, a, b, j);
    (vars.p[b] + vars.pc[b * np + j]) - (vars.p[a] + vars.pc[a * np + j]) - rho * GRAVITY * conn.dz
}

/// Upstream-weighted two-point flux. Derivatives are filled when `derivs`
/// and the FIM derivative fields of `vars` are current.
pub fn phase_flux(conn: &Connection, vars: &BulkVarSet, derivs: bool) -> FluxEval {
    let np = vars.np;
    let nv = vars.nv;
    let (a, b) = (conn.a, conn.b);
    let mut out = FluxEval::default();
    for j in 0..np {
        let (rho, drho) = mean_density(vars, a, b, j);
        let (ia, ib) = (a * np + j, b * np + j);
        let phi = (vars.p[b] + vars.pc[ib]) - (vars.p[a] + vars.pc[ia]) - rho * GRAVITY * conn.dz;
        let up_b = phi > 0.0;
        let iu = if up_b { ib } else { ia };
        let lam = vars.lam[iu];
        let xi = vars.xi[iu];
        let f = conn.trans * lam * phi;
        out.fv[j] = f;
        out.fnc[j] = xi * f;
        out.upstream_b[j] = up_b;
        if !derivs {
            continue;
        }
        let usid = usize::from(up_b);
        for (side, cell) in [(0usize, a), (1usize, b)] {
            let sign = if side == 0 { -1.0 } else { 1.0 };
            let ic = cell * np + j;
            for v in 0..nv {
                let mut dphi = sign * vars.dpc[ic * nv + v];
                if v == 0 {
                    dphi += sign - drho[side] * GRAVITY * conn.dz;
                }
                let mut df = conn.trans * lam * dphi;
                let mut dxi = 0.0;
                if side == usid {
                    df += conn.trans * vars.dlam[iu * nv + v] * phi;
                    if v == 0 {
                        dxi = vars.dxi_dp[iu];
                    }
                }
                out.d[j][side][v] = xi * df + dxi * f;
            }
        }
    }
    out
}
