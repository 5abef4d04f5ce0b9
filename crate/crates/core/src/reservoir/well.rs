use std::f64::consts::PI;

use crate::deck::{ControlMode, WellControl, WellKind, WellSpec};
use crate::grid::{Grid, GRAVITY};

use super::{BulkVarSet, Pvt, ReservoirError, MAXP, MAXV};

/// Peaceman well index for a vertical completion in `cell`.
pub fn well_index(grid: &Grid, cell: usize, radius: f64) -> Option<f64> {
    let [dx, dy, dz] = grid.size[cell];
    let [kx, ky, _] = grid.perm[cell];
    let re = 0.14 * (dx * dx + dy * dy).sqrt();
    if !(re > radius) {
        return None;
    }
    Some(2.0 * PI * (kx * ky).sqrt() * dz / (re / radius).ln())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Perforation {
    /// Cell index (active index before localization, local afterwards).
    pub cell: usize,
    pub wi: f64,
    pub depth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WellTarget {
    Bhp(f64),
    /// Weighted molar rate `Σ w_i q_i`, positive for injection.
    Rate { target: f64, weights: [f64; MAXP] },
    Shut,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WellModel {
    pub name: String,
    pub kind: WellKind,
    pub perfs: Vec<Perforation>,
    /// Depth of the top perforation, where the BHP is defined.
    pub ref_depth: f64,
    pub target: WellTarget,
    /// Injected component.
    pub inj_comp: Option<usize>,
    /// Wellbore fluid density for the hydrostatic head, frozen per step.
    pub head_density: f64,
    /// Last solved bottom-hole pressure.
    pub bhp: f64,
}

/// Perforation rates of one well in mol/s, positive into the reservoir.
#[derive(Debug, Clone, PartialEq)]
pub struct WellRates {
    pub bhp: f64,
    pub q: Vec<[f64; MAXP]>,
    /// `dq[k * nperf + l][i][v]` is `∂q_{i,k}/∂x_{l,v}` for perforations
    /// `k`, `l`; only the diagonal is populated under BHP control.
    pub dq: Vec<[[f64; MAXV]; MAXP]>,
}

impl WellRates {
    pub fn total(&self) -> [f64; MAXP] {
        let mut t = [0.0; MAXP];
        for q in &self.q {
            for i in 0..MAXP {
                t[i] += q[i];
            }
        }
        t
    }
}

impl WellModel {
    /// Builds the well on active cell indices of `grid`.
    pub fn new(spec: &WellSpec, grid: &Grid) -> Result<WellModel, ReservoirError> {
        let mut perfs = Vec::with_capacity(spec.perforations.len());
        for &(i, j, k) in &spec.perforations {
            let cell = grid.active_at(i, j, k).ok_or_else(|| ReservoirError::BadWellGeometry {
                well: spec.name.clone(),
            })?;
            let wi = well_index(grid, cell, spec.radius).ok_or_else(|| ReservoirError::BadWellGeometry {
                well: spec.name.clone(),
            })?;
            perfs.push(Perforation {
                cell,
                wi,
                depth: grid.depth[cell],
            });
        }
        let ref_depth = perfs.iter().map(|p| p.depth).fold(f64::INFINITY, f64::min);
        Ok(WellModel {
            name: spec.name.clone(),
            kind: spec.kind,
            perfs,
            ref_depth,
            target: WellTarget::Shut,
            inj_comp: None,
            head_density: 0.0,
            bhp: 0.0,
        })
    }

    pub fn localize(&mut self, local_of: impl Fn(usize) -> usize) {
        for p in &mut self.perfs {
            p.cell = local_of(p.cell);
        }
    }

    pub fn is_shut(&self) -> bool {
        matches!(self.target, WellTarget::Shut)
    }

    /// Applies a schedule control. Surface volume per mole is `1/ξ_ref`.
    pub fn set_control(&mut self, ctl: &WellControl, pvt: &Pvt) {
        let np = pvt.n_phases();
        let comp = ctl.phase.and_then(|ph| pvt.phases.iter().position(|&q| q == ph));
        if self.kind == WellKind::Injector {
            self.inj_comp = comp;
        }
        self.target = match ctl.mode {
            ControlMode::Shut => WellTarget::Shut,
            ControlMode::Bhp(b) => WellTarget::Bhp(b),
            ControlMode::Rate(r) => {
                let mut weights = [0.0; MAXP];
                for (i, w) in weights.iter_mut().enumerate().take(np) {
                    if comp.is_none_or(|c| c == i) {
                        *w = 1.0 / pvt.xi_ref[i];
                    }
                }
                let target = if self.kind == WellKind::Injector { r } else { -r };
                if r == 0.0 {
                    WellTarget::Shut
                } else {
                    WellTarget::Rate { target, weights }
                }
            }
        };
        if self.kind == WellKind::Injector && self.inj_comp.is_none() {
            self.target = WellTarget::Shut;
        }
    }

    /// Freezes the wellbore density from the top perforation's cell.
    pub fn update_head_density(&mut self, vars: &BulkVarSet) {
        let Some(top) = self
            .perfs
            .iter()
            .min_by(|a, b| a.depth.total_cmp(&b.depth))
            .map(|p| p.cell)
        else {
            return;
        };
        let np = vars.np;
        let rho = &vars.rho[top * np..(top + 1) * np];
        self.head_density = match (self.kind, self.inj_comp) {
            (WellKind::Injector, Some(c)) => rho[c],
            _ => {
                let lam = &vars.lam[top * np..(top + 1) * np];
                let lt: f64 = lam.iter().sum();
                if lt > 0.0 {
                    lam.iter().zip(rho).map(|(l, r)| l * r).sum::<f64>() / lt
                } else {
                    rho.iter().sum::<f64>() / np as f64
                }
            }
        };
    }

    fn head(&self, k: usize) -> f64 {
        self.head_density * GRAVITY * (self.perfs[k].depth - self.ref_depth)
    }

    fn active(&self, delta: f64) -> bool {
        match self.kind {
            WellKind::Injector => delta > 0.0,
            WellKind::Producer => delta < 0.0,
        }
    }
}

/// Per-perforation mobility factors `m_i` and their derivatives.
fn mobility(well: &WellModel, vars: &BulkVarSet, pvt: &Pvt, k: usize) -> ([f64; MAXP], [[f64; MAXV]; MAXP]) {
    let np = vars.np;
    let nv = vars.nv;
    let c = well.perfs[k].cell;
    let mut m = [0.0; MAXP];
    let mut dm = [[0.0; MAXV]; MAXP];
    match well.kind {
        WellKind::Injector => {
            let Some(i) = well.inj_comp else { return (m, dm) };
            let lt: f64 = vars.lam[c * np..(c + 1) * np].iter().sum();
            let (xi, dxi) = pvt.xi(i, vars.p[c]);
            m[i] = lt * xi;
            for v in 0..nv {
                let dlt: f64 = (0..np).map(|j| vars.dlam[(c * np + j) * nv + v]).sum();
                dm[i][v] = dlt * xi;
            }
            dm[i][0] += lt * dxi;
        }
        WellKind::Producer => {
            for i in 0..np {
                let ci = c * np + i;
                m[i] = vars.lam[ci] * vars.xi[ci];
                for v in 0..nv {
                    dm[i][v] = vars.dlam[ci * nv + v] * vars.xi[ci];
                }
                dm[i][0] += vars.lam[ci] * vars.dxi_dp[ci];
            }
        }
    }
    (m, dm)
}

/// Mobility factors `m_i` of perforation `k`: the rate per unit pressure
/// drawdown divided by the well index.
pub fn perforation_mobility(well: &WellModel, vars: &BulkVarSet, pvt: &Pvt, k: usize) -> [f64; MAXP] {
    mobility(well, vars, pvt, k).0
}

/// Whether a perforation with drawdown `delta = BHP + head − P` flows.
pub fn perforation_active(well: &WellModel, delta: f64) -> bool {
    well.active(delta)
}

/// Hydrostatic head between the top perforation and perforation `k`.
pub fn perforation_head(well: &WellModel, k: usize) -> f64 {
    well.head(k)
}

/// Perforation rates for the current state. Under rate control the BHP is
/// found by bisection on `[p_lo, p_hi]` followed by a closed-form polish on
/// the final active set.
pub fn well_rates(
    well: &WellModel,
    vars: &BulkVarSet,
    pvt: &Pvt,
    p_window: (f64, f64),
    derivs: bool,
) -> Result<WellRates, ReservoirError> {
    let np = vars.np;
    let nv = vars.nv;
    let nperf = well.perfs.len();
    let mut out = WellRates {
        bhp: well.bhp,
        q: vec![[0.0; MAXP]; nperf],
        dq: if derivs { vec![[[0.0; MAXV]; MAXP]; nperf * nperf] } else { Vec::new() },
    };
    let mob: Vec<_> = (0..nperf).map(|k| mobility(well, vars, pvt, k)).collect();
    let p_of = |k: usize| vars.p[well.perfs[k].cell];
    let bhp = match well.target {
        WellTarget::Shut => return Ok(out),
        WellTarget::Bhp(b) => b,
        WellTarget::Rate { target, weights } => {
            let mk: Vec<f64> = mob.iter().map(|(m, _)| (0..np).map(|i| weights[i] * m[i]).sum()).collect();
            let f = |b: f64| -> f64 {
                (0..nperf)
                    .map(|k| {
                        let d = b + well.head(k) - p_of(k);
                        if well.active(d) {
                            well.perfs[k].wi * mk[k] * d
                        } else {
                            0.0
                        }
                    })
                    .sum()
            };
            let (mut lo, mut hi) = p_window;
            if !(f(lo) <= target && target <= f(hi)) {
                return Err(ReservoirError::WellDead { well: well.name.clone() });
            }
            while hi - lo > 1.0 {
                let mid = 0.5 * (lo + hi);
                if f(mid) < target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let b0 = 0.5 * (lo + hi);
            let mut num = target;
            let mut den = 0.0;
            for k in 0..nperf {
                if well.active(b0 + well.head(k) - p_of(k)) {
                    let wm = well.perfs[k].wi * mk[k];
                    num += wm * (p_of(k) - well.head(k));
                    den += wm;
                }
            }
            if !(den > 0.0) {
                return Err(ReservoirError::WellDead { well: well.name.clone() });
            }
            let b = num / den;
            if derivs {
                // dB/dx_l from the rate constraint with the active set frozen
                let mut db = vec![[0.0; MAXV]; nperf];
                for l in 0..nperf {
                    let dl = b0 + well.head(l) - p_of(l);
                    if !well.active(dl) {
                        continue;
                    }
                    let delta = b + well.head(l) - p_of(l);
                    let wi = well.perfs[l].wi;
                    let dm = &mob[l].1;
                    for v in 0..nv {
                        let dmk: f64 = (0..np).map(|i| weights[i] * dm[i][v]).sum();
                        let mut g = dmk * delta;
                        if v == 0 {
                            g -= mk[l];
                        }
                        db[l][v] = -wi * g / den;
                    }
                }
                for k in 0..nperf {
                    if !well.active(b0 + well.head(k) - p_of(k)) {
                        continue;
                    }
                    let wi = well.perfs[k].wi;
                    let m = &mob[k].0;
                    for l in 0..nperf {
                        for i in 0..np {
                            for v in 0..nv {
                                out.dq[k * nperf + l][i][v] += wi * m[i] * db[l][v];
                            }
                        }
                    }
                }
            }
            out.bhp = b;
            fill(well, vars, &mob, b, &mut out, derivs, Some(b0));
            return Ok(out);
        }
    };
    out.bhp = bhp;
    fill(well, vars, &mob, bhp, &mut out, derivs, None);
    Ok(out)
}

fn fill(
    well: &WellModel,
    vars: &BulkVarSet,
    mob: &[([f64; MAXP], [[f64; MAXV]; MAXP])],
    b: f64,
    out: &mut WellRates,
    derivs: bool,
    active_at: Option<f64>,
) {
    let np = vars.np;
    let nv = vars.nv;
    let nperf = well.perfs.len();
    for k in 0..nperf {
        let p = vars.p[well.perfs[k].cell];
        let d = b + well.head(k) - p;
        let probe = active_at.map_or(d, |b0| b0 + well.head(k) - p);
        if !well.active(probe) {
            continue;
        }
        let wi = well.perfs[k].wi;
        let (m, dm) = &mob[k];
        for i in 0..np {
            out.q[k][i] = wi * m[i] * d;
            if derivs {
                for v in 0..nv {
                    let mut g = dm[i][v] * d;
                    if v == 0 {
                        g -= m[i];
                    }
                    out.dq[k * nperf + k][i][v] += wi * g;
                }
            }
        }
    }
}
