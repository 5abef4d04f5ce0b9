use crate::deck::{InitSpec, Phase};
use crate::grid::{Grid, GRAVITY};

use super::{BulkVarSet, Properties, ReservoirError, MAXP};

const MAX_SWEEPS: usize = 50;
const P_TOL: f64 = 1.0;

/// Contact-based saturations at depth `d`.
fn zone_saturation(props: &Properties, init: &InitSpec, d: f64) -> [f64; MAXP] {
    let phases = &props.pvt.phases;
    let np = phases.len();
    let idx = |ph: Phase| phases.iter().position(|&p| p == ph);
    let mut s = [0.0; MAXP];
    if np == 1 {
        s[0] = 1.0;
        return s;
    }
    let w = idx(Phase::Water);
    if let (Some(w), Some(woc)) = (w, init.woc) {
        if d > woc {
            s[w] = 1.0;
            return s;
        }
    }
    let sw = w.map_or(0.0, |_| init.swi);
    if let Some(w) = w {
        s[w] = sw;
    }
    let gas_cap = init.goc.is_some_and(|goc| d < goc);
    let hc = match (idx(Phase::Oil), idx(Phase::Gas)) {
        (Some(_), Some(g)) if gas_cap => Some(g),
        (Some(o), _) => Some(o),
        (None, g) => g,
    };
    match hc {
        Some(h) => s[h] += 1.0 - sw,
        None => s[w.unwrap_or(0)] = 1.0,
    }
    s
}

fn mixture_density(props: &Properties, s: &[f64; MAXP], p: f64) -> f64 {
    (0..props.np())
        .map(|j| s[j] * props.pvt.rho_from_xi(j, props.pvt.xi(j, p).0))
        .sum()
}

/// Hydrostatic pressure at `d`, integrating the zone mixture density from
/// the reference depth with segments split at the fluid contacts.
fn column_pressure(props: &Properties, init: &InitSpec, d: f64) -> Result<f64, ReservoirError> {
    let mut marks: Vec<f64> = [init.woc, init.goc]
        .into_iter()
        .flatten()
        .filter(|&c| (c - init.ref_depth) * (d - c) > 0.0)
        .collect();
    marks.sort_by(|a, b| a.total_cmp(b));
    if d < init.ref_depth {
        marks.reverse();
    }
    marks.push(d);
    let mut z0 = init.ref_depth;
    let mut p0 = init.ref_pressure;
    for z1 in marks {
        let s = zone_saturation(props, init, 0.5 * (z0 + z1));
        let mut p1 = p0;
        let mut converged = false;
        for _ in 0..MAX_SWEEPS {
            let next = p0 + mixture_density(props, &s, 0.5 * (p0 + p1)) * GRAVITY * (z1 - z0);
            let done = (next - p1).abs() < P_TOL;
            p1 = next;
            if done {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(ReservoirError::NoConvergence { sweeps: MAX_SWEEPS });
        }
        z0 = z1;
        p0 = p1;
    }
    Ok(p0)
}

/// Hydrostatic equilibrium state for all active cells of `grid`.
pub fn init_hydrostatic(grid: &Grid, props: &Properties, init: &InitSpec) -> Result<BulkVarSet, ReservoirError> {
    let np = props.np();
    let mut vars = BulkVarSet::new(np, grid.volume.clone(), grid.poro0.clone(), grid.depth.clone());
    for c in 0..grid.n_active {
        let d = grid.depth[c];
        let p = column_pressure(props, init, d)?;
        let s = zone_saturation(props, init, d);
        let vp = props
            .rock
            .update(p, grid.poro0[c], grid.volume[c])
            .ok_or(ReservoirError::NonPhysical { cell: c })?
            .vp;
        vars.p[c] = p;
        for j in 0..np {
            vars.n[c * np + j] = vp * s[j] * props.pvt.xi(j, p).0;
        }
    }
    vars.update(props, 0..grid.n_active, false)?;
    vars.accept();
    vars.s_hist.copy_from_slice(&vars.s_last);
    Ok(vars)
}
