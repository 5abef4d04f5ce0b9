//! Per-cell physical state in structure-of-arrays layout and the bulk,
//! connection and well computations built on it.
//!
//! Every property kernel has a universal form and a FIM form; the FIM form
//! reuses the universal computation and adds derivatives with respect to the
//! primary unknowns `(P, N_0 .. N_{nc-1})`, indexed `0..nv` with `nv = nc + 1`.

mod flux;
mod init;
mod pvt;
mod rock;
mod sat;
mod table;
mod well;

use thiserror::Error;

use crate::deck::DeckModel;

pub use flux::{mean_density, phase_flux, potential, FluxEval};
pub use init::init_hydrostatic;
pub use pvt::Pvt;
pub use rock::{Rock, RockState};
pub use sat::{SatEval, SatFunctions};
pub use table::Table;
pub use well::{
    perforation_active, perforation_head, perforation_mobility, well_index, well_rates, Perforation, WellModel,
    WellRates, WellTarget,
};

/// Largest supported phase (and component) count.
pub const MAXP: usize = 3;
/// Largest number of primary unknowns per cell.
pub const MAXV: usize = MAXP + 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReservoirError {
    #[error("cell {cell}: fluid volume is zero or undefined")]
    DegenerateState { cell: usize },
    #[error("cell {cell}: porosity is not positive")]
    NonPhysical { cell: usize },
    #[error("hydrostatic initialization did not converge within {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("saturation tables do not cover the phase set")]
    MissingSatTable,
    #[error("well {well}: no bottom-hole pressure meets the rate target")]
    WellDead { well: String },
    #[error("well {well}: drainage radius does not exceed the wellbore radius")]
    BadWellGeometry { well: String },
}

/// The bulk sub-models: PVT, saturation functions and rock.
#[derive(Debug, Clone, PartialEq)]
pub struct Properties {
    pub pvt: Pvt,
    pub sat: SatFunctions,
    pub rock: Rock,
}

impl Properties {
    pub fn new(model: &DeckModel) -> Result<Properties, ReservoirError> {
        Ok(Properties {
            pvt: Pvt::new(&model.fluid),
            sat: SatFunctions::new(&model.fluid, &model.sat_table)
                .ok_or(ReservoirError::MissingSatTable)?,
            rock: Rock::new(&model.rock),
        })
    }

    pub fn np(&self) -> usize {
        self.pvt.n_phases()
    }
}

/// Flash derivatives for one cell.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FlashDerivs {
    pub dxi_dp: [f64; MAXP],
    pub drho_dp: [f64; MAXP],
    pub dmu_dp: [f64; MAXP],
    /// `∂V_f/∂(P, N_i)`.
    pub dvf: [f64; MAXV],
    /// `ds[j][v] = ∂S_j/∂(P, N_i)`.
    pub ds: [[f64; MAXV]; MAXP],
}

/// Phase split of one cell.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PhaseState {
    pub np: usize,
    pub s: [f64; MAXP],
    pub xi: [f64; MAXP],
    pub rho: [f64; MAXP],
    pub mu: [f64; MAXP],
    pub vf: f64,
    /// `x[i][j]`: mole fraction of component `i` in phase `j`.
    pub x: [[f64; MAXP]; MAXP],
    pub deriv: Option<FlashDerivs>,
}

fn flash_impl(pvt: &Pvt, p: f64, n: &[f64], derivs: bool) -> Option<PhaseState> {
    let np = pvt.n_phases();
    let mut st = PhaseState {
        np,
        ..PhaseState::default()
    };
    let mut dxi = [0.0; MAXP];
    let mut v = [0.0; MAXP];
    for j in 0..np {
        let (xi, d) = pvt.xi(j, p);
        st.xi[j] = xi;
        dxi[j] = d;
        st.rho[j] = pvt.rho_from_xi(j, xi);
        st.mu[j] = pvt.mu(j, p).0;
        st.x[j][j] = 1.0;
        v[j] = n[j] / xi;
        st.vf += v[j];
    }
    if !(st.vf > 0.0) || !st.vf.is_finite() {
        return None;
    }
    for j in 0..np {
        st.s[j] = v[j] / st.vf;
    }
    debug_assert!(
        v[..np].iter().any(|&x| x < 0.0) || (st.s[..np].iter().sum::<f64>() - 1.0).abs() <= 1e-12,
        "saturations do not close"
    );
    debug_assert!((0..np).all(|j| (0..np).map(|i| st.x[i][j]).sum::<f64>() == 1.0));
    if derivs {
        let nv = np + 1;
        let mut d = FlashDerivs::default();
        let mut dv = [[0.0; MAXV]; MAXP];
        for j in 0..np {
            d.dxi_dp[j] = dxi[j];
            d.drho_dp[j] = pvt.rho_from_xi(j, dxi[j]);
            d.dmu_dp[j] = pvt.mu(j, p).1;
            dv[j][0] = -n[j] * dxi[j] / (st.xi[j] * st.xi[j]);
            dv[j][1 + j] = 1.0 / st.xi[j];
            for k in 0..nv {
                d.dvf[k] += dv[j][k];
            }
        }
        for j in 0..np {
            for k in 0..nv {
                d.ds[j][k] = (dv[j][k] - st.s[j] * d.dvf[k]) / st.vf;
            }
        }
        st.deriv = Some(d);
    }
    Some(st)
}

/// Dead-oil flash: phase volumes `N_j / ξ_j(P)` normalized into saturations.
pub fn flash(pvt: &Pvt, p: f64, n: &[f64]) -> Result<PhaseState, ReservoirError> {
    flash_impl(pvt, p, n, false).ok_or(ReservoirError::DegenerateState { cell: 0 })
}

/// [`flash`] plus analytic derivatives with respect to `(P, N_i)`.
pub fn flash_fim(pvt: &Pvt, p: f64, n: &[f64]) -> Result<PhaseState, ReservoirError> {
    flash_impl(pvt, p, n, true).ok_or(ReservoirError::DegenerateState { cell: 0 })
}

/// All per-cell state of one worker (interior cells first, then ghosts).
///
/// Arrays are field-major: a scalar field is indexed by cell, a per-phase
/// field by `cell * np + j`, a derivative field by `(cell * np + j) * nv + v`.
#[derive(Debug, Clone, PartialEq)]
pub struct BulkVarSet {
    pub n_cells: usize,
    pub np: usize,
    pub nv: usize,
    pub bulk_volume: Vec<f64>,
    pub poro0: Vec<f64>,
    pub depth: Vec<f64>,

    pub p: Vec<f64>,
    pub n: Vec<f64>,
    pub s: Vec<f64>,
    pub xi: Vec<f64>,
    pub rho: Vec<f64>,
    pub mu: Vec<f64>,
    pub kr: Vec<f64>,
    pub pc: Vec<f64>,
    /// Mobility `kr / μ`.
    pub lam: Vec<f64>,
    /// `x[(cell * nc + i) * np + j]`.
    pub x: Vec<f64>,
    pub phi: Vec<f64>,
    pub vp: Vec<f64>,
    pub vf: Vec<f64>,

    pub dvp_dp: Vec<f64>,
    pub dxi_dp: Vec<f64>,
    pub drho_dp: Vec<f64>,
    pub dvf: Vec<f64>,
    pub ds: Vec<f64>,
    pub dlam: Vec<f64>,
    pub dpc: Vec<f64>,

    pub p_last: Vec<f64>,
    pub n_last: Vec<f64>,
    pub s_last: Vec<f64>,
    /// Saturations of the step before the last accepted one.
    pub s_hist: Vec<f64>,
    pub has_hist: bool,
}

impl BulkVarSet {
    pub fn new(np: usize, bulk_volume: Vec<f64>, poro0: Vec<f64>, depth: Vec<f64>) -> BulkVarSet {
        let n = bulk_volume.len();
        let nv = np + 1;
        let z = |m: usize| vec![0.0; n * m];
        BulkVarSet {
            n_cells: n,
            np,
            nv,
            bulk_volume,
            poro0,
            depth,
            p: z(1),
            n: z(np),
            s: z(np),
            xi: z(np),
            rho: z(np),
            mu: z(np),
            kr: z(np),
            pc: z(np),
            lam: z(np),
            x: z(np * np),
            phi: z(1),
            vp: z(1),
            vf: z(1),
            dvp_dp: z(1),
            dxi_dp: z(np),
            drho_dp: z(np),
            dvf: z(nv),
            ds: z(np * nv),
            dlam: z(np * nv),
            dpc: z(np * nv),
            p_last: z(1),
            n_last: z(np),
            s_last: z(np),
            s_hist: z(np),
            has_hist: false,
        }
    }

    /// Copy of the listed cells (state and geometry), in the given order.
    pub fn subset(&self, cells: &[usize]) -> BulkVarSet {
        let pick = |src: &[f64], m: usize| -> Vec<f64> {
            cells
                .iter()
                .flat_map(|&c| src[c * m..(c + 1) * m].iter().copied())
                .collect()
        };
        let np = self.np;
        let mut out = BulkVarSet::new(
            np,
            pick(&self.bulk_volume, 1),
            pick(&self.poro0, 1),
            pick(&self.depth, 1),
        );
        out.p = pick(&self.p, 1);
        out.n = pick(&self.n, np);
        out.p_last = pick(&self.p_last, 1);
        out.n_last = pick(&self.n_last, np);
        out.s_last = pick(&self.s_last, np);
        out.s_hist = pick(&self.s_hist, np);
        out.has_hist = self.has_hist;
        out
    }

    pub fn moles(&self, c: usize) -> &[f64] {
        &self.n[c * self.np..(c + 1) * self.np]
    }

    pub fn sat(&self, c: usize) -> &[f64] {
        &self.s[c * self.np..(c + 1) * self.np]
    }

    /// Recomputes flash, saturation functions and rock for `cells`.
    pub fn update(
        &mut self,
        props: &Properties,
        cells: std::ops::Range<usize>,
        derivs: bool,
    ) -> Result<(), ReservoirError> {
        for c in cells {
            self.update_cell(props, c, derivs)?;
        }
        Ok(())
    }

    pub fn update_cell(&mut self, props: &Properties, c: usize, derivs: bool) -> Result<(), ReservoirError> {
        let np = self.np;
        let nv = self.nv;
        let p = self.p[c];
        let st = flash_impl(&props.pvt, p, &self.n[c * np..(c + 1) * np], derivs)
            .ok_or(ReservoirError::DegenerateState { cell: c })?;
        let rock = props
            .rock
            .update(p, self.poro0[c], self.bulk_volume[c])
            .ok_or(ReservoirError::NonPhysical { cell: c })?;
        let sat = props.sat.eval(&st.s[..np]);
        self.vf[c] = st.vf;
        self.phi[c] = rock.phi;
        self.vp[c] = rock.vp;
        self.dvp_dp[c] = rock.dvp_dp;
        for j in 0..np {
            let cj = c * np + j;
            self.s[cj] = st.s[j];
            self.xi[cj] = st.xi[j];
            self.rho[cj] = st.rho[j];
            self.mu[cj] = st.mu[j];
            self.kr[cj] = sat.kr[j];
            self.pc[cj] = sat.pc[j];
            self.lam[cj] = sat.kr[j] / st.mu[j];
            for i in 0..np {
                self.x[(c * np + i) * np + j] = st.x[i][j];
            }
        }
        if let Some(d) = st.deriv {
            self.dvf[c * nv..(c + 1) * nv].copy_from_slice(&d.dvf[..nv]);
            for j in 0..np {
                let cj = c * np + j;
                self.dxi_dp[cj] = d.dxi_dp[j];
                self.drho_dp[cj] = d.drho_dp[j];
                let mu = st.mu[j];
                for v in 0..nv {
                    let mut dkr = 0.0;
                    let mut dpc = 0.0;
                    for k in 0..np {
                        dkr += sat.dkr[j][k] * d.ds[k][v];
                        dpc += sat.dpc[j][k] * d.ds[k][v];
                    }
                    let mut dlam = dkr / mu;
                    if v == 0 {
                        dlam -= sat.kr[j] * d.dmu_dp[j] / (mu * mu);
                    }
                    self.ds[cj * nv + v] = d.ds[j][v];
                    self.dlam[cj * nv + v] = dlam;
                    self.dpc[cj * nv + v] = dpc;
                }
            }
        }
        Ok(())
    }

    /// Records the current state as the last accepted one.
    pub fn accept(&mut self) {
        std::mem::swap(&mut self.s_hist, &mut self.s_last);
        self.s_last.copy_from_slice(&self.s);
        self.p_last.copy_from_slice(&self.p);
        self.n_last.copy_from_slice(&self.n);
    }

    /// Marks the saturation history valid once a step has been accepted on
    /// top of the initial state.
    pub fn set_history_valid(&mut self, valid: bool) {
        self.has_hist = valid;
    }

    /// Rolls primaries back to the last accepted state. Derived properties
    /// must be recomputed by the caller.
    pub fn restore(&mut self) {
        self.p.copy_from_slice(&self.p_last);
        self.n.copy_from_slice(&self.n_last);
    }

    /// Sum of `N_i` over `cells` per component.
    pub fn component_totals(&self, cells: std::ops::Range<usize>) -> Vec<f64> {
        let mut t = vec![0.0; self.np];
        for c in cells {
            for (i, ti) in t.iter_mut().enumerate() {
                *ti += self.n[c * self.np + i];
            }
        }
        t
    }
}

/// Thresholds of the physical-validity check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalLimits {
    pub p_min: f64,
    pub p_max: f64,
    pub neg_moles_rel: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Ok,
    Cut(String),
}

impl Verdict {
    pub fn is_ok(&self) -> bool {
        matches!(self, Verdict::Ok)
    }

    /// Conjunction of per-worker verdicts; the first cut (in rank order) wins.
    pub fn all(verdicts: impl IntoIterator<Item = Verdict>) -> Verdict {
        verdicts
            .into_iter()
            .find(|v| !v.is_ok())
            .unwrap_or(Verdict::Ok)
    }
}

/// Checks moles, pressure window and flash validity of the first `n_check`
/// cells, given properties for them were just recomputed into `flash_ok`.
pub fn check_physical(vars: &BulkVarSet, n_check: usize, limits: &PhysicalLimits) -> Verdict {
    let np = vars.np;
    for c in 0..n_check {
        let n = &vars.n[c * np..(c + 1) * np];
        let total: f64 = n.iter().map(|v| v.abs()).sum();
        if n.iter().any(|&v| v < -limits.neg_moles_rel * total) {
            return Verdict::Cut("negative moles".into());
        }
        let p = vars.p[c];
        if !(p >= limits.p_min && p <= limits.p_max) {
            return Verdict::Cut("pressure out of range".into());
        }
        if !(vars.vf[c] > 0.0) || !vars.vf[c].is_finite() {
            return Verdict::Cut("flash failed".into());
        }
    }
    Verdict::Ok
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deck::{FluidSpec, Phase, PhaseProps, Viscosity};

    pub(crate) fn pvt(comp: [f64; 2], xi_ref: [f64; 2]) -> Pvt {
        Pvt::new(&FluidSpec {
            phases: vec![Phase::Water, Phase::Oil],
            props: [Phase::Water, Phase::Oil]
                .iter()
                .enumerate()
                .map(|(j, &phase)| PhaseProps {
                    phase,
                    p_ref: 1e7,
                    xi_ref: xi_ref[j],
                    rho_ref: 1000.0 - 200.0 * j as f64,
                    compressibility: comp[j],
                    viscosity: Viscosity::Constant(1e-3),
                })
                .collect(),
            component_names: vec!["WATER".into(), "OIL".into()],
        })
    }

    #[test]
    fn incompressible_limit() {
        let pv = pvt([0.0, 0.0], [5e4, 8e3]);
        let st = flash(&pv, 3.3e7, &[10.0, 10.0]).unwrap();
        assert_eq!(st.xi[0], 5e4);
        assert_eq!(st.xi[1], 8e3);
        let st = flash_fim(&pv, 3.3e7, &[10.0, 10.0]).unwrap();
        assert_eq!(st.deriv.unwrap().dxi_dp[0], 0.0);
    }

    #[test]
    fn single_phase_saturation() {
        let pv = pvt([1e-9, 1e-9], [5e4, 8e3]);
        let st = flash(&pv, 2e7, &[10.0, 0.0]).unwrap();
        assert_eq!(st.s[0], 1.0);
        assert_eq!(st.s[1], 0.0);
    }

    #[test]
    fn volume_ratio_split() {
        // equal moles, water twice as dense (molar) as oil
        let pv = pvt([1e-9, 2e-9], [2e4, 1e4]);
        let st = flash(&pv, 1e7, &[5.0, 5.0]).unwrap();
        approx::assert_relative_eq!(st.s[0], 1.0 / 3.0, max_relative = 1e-14);
        approx::assert_relative_eq!(st.s[1], 2.0 / 3.0, max_relative = 1e-14);
    }

    #[test]
    fn dvf_dn_is_inverse_density() {
        let pv = pvt([1e-9, 2e-9], [2e4, 1e4]);
        let st = flash_fim(&pv, 1.3e7, &[5.0, 7.0]).unwrap();
        let d = st.deriv.unwrap();
        approx::assert_relative_eq!(d.dvf[1], 1.0 / st.xi[0], max_relative = 1e-15);
        approx::assert_relative_eq!(d.dvf[2], 1.0 / st.xi[1], max_relative = 1e-15);
    }

    #[test]
    fn empty_cell_is_degenerate() {
        let pv = pvt([0.0, 0.0], [5e4, 8e3]);
        assert!(matches!(flash(&pv, 1e7, &[0.0, 0.0]), Err(ReservoirError::DegenerateState { .. })));
    }

    #[test]
    fn verdict_conjunction() {
        assert_eq!(Verdict::all([Verdict::Ok, Verdict::Ok]), Verdict::Ok);
        assert_eq!(
            Verdict::all([Verdict::Ok, Verdict::Cut("x".into()), Verdict::Cut("y".into())]),
            Verdict::Cut("x".into())
        );
    }
}
