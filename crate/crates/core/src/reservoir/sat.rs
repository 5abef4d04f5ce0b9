use crate::deck::{FluidSpec, Phase, SatCurve, SatTable};

use super::table::Table;
use super::MAXP;

/// Relative permeability and capillary pressure with saturation slopes.
///
/// `dkr[j][k]` is ∂kr_j/∂S_k; likewise `dpc`. Capillary pressure is the
/// offset of each phase pressure over the reference phase.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SatEval {
    pub kr: [f64; MAXP],
    pub pc: [f64; MAXP],
    pub dkr: [[f64; MAXP]; MAXP],
    pub dpc: [[f64; MAXP]; MAXP],
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Single,
    Two {
        displacing: usize,
        displaced: usize,
        table: Table,
    },
    /// Water-oil and gas-oil tables; oil kr is their normalized product.
    Three {
        w: usize,
        o: usize,
        g: usize,
        swof: Table,
        sgof: Table,
        kro_end: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SatFunctions {
    np: usize,
    kind: Kind,
}

const KR_DISPLACING: usize = 0;
const KR_DISPLACED: usize = 1;
const PC: usize = 2;

fn table(curve: &SatCurve) -> Table {
    let r = &curve.rows;
    Table::new(
        r.iter().map(|r| r.s).collect(),
        vec![
            r.iter().map(|r| r.kr_displacing).collect(),
            r.iter().map(|r| r.kr_displaced).collect(),
            r.iter().map(|r| r.pc).collect(),
        ],
    )
}

impl SatFunctions {
    /// Compiles the tables for `fluid`'s phase set. Returns `None` when a
    /// required table is absent (validation reports that case).
    pub fn new(fluid: &FluidSpec, sat: &SatTable) -> Option<SatFunctions> {
        let np = fluid.n_phases();
        let idx = |p| fluid.index_of(p);
        let kind = match np {
            1 => Kind::Single,
            2 => {
                let curve = sat.curves.first()?;
                Kind::Two {
                    displacing: idx(curve.displacing)?,
                    displaced: idx(curve.displaced)?,
                    table: table(curve),
                }
            }
            _ => {
                let swof = sat.curve(Phase::Water, Phase::Oil)?;
                let sgof = sat.curve(Phase::Gas, Phase::Oil)?;
                let swof = table(swof);
                let kro_end = swof.first(KR_DISPLACED);
                Kind::Three {
                    w: idx(Phase::Water)?,
                    o: idx(Phase::Oil)?,
                    g: idx(Phase::Gas)?,
                    swof,
                    sgof: table(sgof),
                    kro_end: if kro_end > 0.0 { kro_end } else { 1.0 },
                }
            }
        };
        Some(SatFunctions { np, kind })
    }

    pub fn n_phases(&self) -> usize {
        self.np
    }

    pub fn eval(&self, s: &[f64]) -> SatEval {
        let mut e = SatEval::default();
        match &self.kind {
            Kind::Single => e.kr[0] = 1.0,
            Kind::Two {
                displacing,
                displaced,
                table,
            } => {
                let (d, r) = (*displacing, *displaced);
                let loc = table.locate(s[d]);
                e.kr[d] = table.value(KR_DISPLACING, loc);
                e.kr[r] = table.value(KR_DISPLACED, loc);
                e.pc[d] = table.value(PC, loc);
                e.dkr[d][d] = table.slope(KR_DISPLACING, loc);
                e.dkr[r][d] = table.slope(KR_DISPLACED, loc);
                e.dpc[d][d] = table.slope(PC, loc);
            }
            Kind::Three {
                w,
                o,
                g,
                swof,
                sgof,
                kro_end,
            } => {
                let (w, o, g) = (*w, *o, *g);
                let lw = swof.locate(s[w]);
                let lg = sgof.locate(s[g]);
                e.kr[w] = swof.value(KR_DISPLACING, lw);
                e.dkr[w][w] = swof.slope(KR_DISPLACING, lw);
                e.kr[g] = sgof.value(KR_DISPLACING, lg);
                e.dkr[g][g] = sgof.slope(KR_DISPLACING, lg);
                let krow = swof.value(KR_DISPLACED, lw);
                let krog = sgof.value(KR_DISPLACED, lg);
                e.kr[o] = krow * krog / kro_end;
                e.dkr[o][w] = swof.slope(KR_DISPLACED, lw) * krog / kro_end;
                e.dkr[o][g] = krow * sgof.slope(KR_DISPLACED, lg) / kro_end;
                e.pc[w] = swof.value(PC, lw);
                e.dpc[w][w] = swof.slope(PC, lw);
                e.pc[g] = sgof.value(PC, lg);
                e.dpc[g][g] = sgof.slope(PC, lg);
            }
        }
        e
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deck::{PhaseProps, SatRow, Viscosity};

    fn fluid(phases: &[Phase]) -> FluidSpec {
        FluidSpec {
            phases: phases.to_vec(),
            props: phases
                .iter()
                .map(|&phase| PhaseProps {
                    phase,
                    p_ref: 1e7,
                    xi_ref: 1e4,
                    rho_ref: 800.0,
                    compressibility: 0.0,
                    viscosity: Viscosity::Constant(1e-3),
                })
                .collect(),
            component_names: phases.iter().map(|p| p.to_string()).collect(),
        }
    }

    fn curve(displacing: Phase, displaced: Phase) -> SatCurve {
        SatCurve {
            displacing,
            displaced,
            rows: vec![
                SatRow { s: 0.1, kr_displacing: 0.0, kr_displaced: 0.8, pc: 0.0 },
                SatRow { s: 0.3, kr_displacing: 0.1, kr_displaced: 0.4, pc: 0.0 },
                SatRow { s: 0.5, kr_displacing: 0.3, kr_displaced: 0.1, pc: 0.0 },
                SatRow { s: 0.9, kr_displacing: 1.0, kr_displaced: 0.0, pc: 0.0 },
            ],
        }
    }

    #[test]
    fn two_phase_interpolation() {
        let f = fluid(&[Phase::Water, Phase::Oil]);
        let sf = SatFunctions::new(&f, &SatTable { curves: vec![curve(Phase::Water, Phase::Oil)] }).unwrap();
        let e = sf.eval(&[0.4, 0.6]);
        approx::assert_relative_eq!(e.kr[0], 0.2, max_relative = 1e-14);
        approx::assert_relative_eq!(e.kr[1], 0.25, max_relative = 1e-14);
        let e = sf.eval(&[0.3, 0.7]);
        assert_eq!(e.kr[0], 0.1);
        let e = sf.eval(&[0.0, 1.0]);
        assert_eq!(e.kr[0], 0.0);
        assert_eq!(e.kr[1], 0.8);
        assert_eq!(e.dkr[0][0], 0.0);
    }

    #[test]
    fn three_phase_product_rule() {
        let f = fluid(&[Phase::Water, Phase::Oil, Phase::Gas]);
        let sat = SatTable {
            curves: vec![curve(Phase::Water, Phase::Oil), curve(Phase::Gas, Phase::Oil)],
        };
        let sf = SatFunctions::new(&f, &sat).unwrap();
        let e = sf.eval(&[0.1, 0.9, 0.0]);
        approx::assert_relative_eq!(e.kr[1], 0.8, max_relative = 1e-14);
        let e = sf.eval(&[0.3, 0.4, 0.3]);
        approx::assert_relative_eq!(e.kr[1], 0.4 * 0.4 / 0.8, max_relative = 1e-14);
    }

    #[test]
    fn single_phase_is_fully_mobile() {
        let f = fluid(&[Phase::Water]);
        let sf = SatFunctions::new(&f, &SatTable::default()).unwrap();
        assert_eq!(sf.eval(&[1.0]).kr[0], 1.0);
    }
}
