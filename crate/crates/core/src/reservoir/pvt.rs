use crate::deck::{FluidSpec, Phase, Viscosity};

use super::table::Table;

#[derive(Debug, Clone, PartialEq)]
enum ViscFn {
    Constant(f64),
    Table(Table),
}

/// Dead-oil PVT: one component per phase, exponential compressibility.
#[derive(Debug, Clone, PartialEq)]
pub struct Pvt {
    pub phases: Vec<Phase>,
    pub xi_ref: Vec<f64>,
    pub rho_ref: Vec<f64>,
    pub comp: Vec<f64>,
    pub p_ref: Vec<f64>,
    visc: Vec<ViscFn>,
}

impl Pvt {
    pub fn new(spec: &FluidSpec) -> Pvt {
        let props = &spec.props;
        Pvt {
            phases: spec.phases.clone(),
            xi_ref: props.iter().map(|p| p.xi_ref).collect(),
            rho_ref: props.iter().map(|p| p.rho_ref).collect(),
            comp: props.iter().map(|p| p.compressibility).collect(),
            p_ref: props.iter().map(|p| p.p_ref).collect(),
            visc: props
                .iter()
                .map(|p| match &p.viscosity {
                    Viscosity::Constant(mu) => ViscFn::Constant(*mu),
                    Viscosity::Table(rows) => ViscFn::Table(Table::new(
                        rows.iter().map(|r| r.0).collect(),
                        vec![rows.iter().map(|r| r.1).collect()],
                    )),
                })
                .collect(),
        }
    }

    pub fn n_phases(&self) -> usize {
        self.phases.len()
    }

    /// Molar density and its pressure derivative.
    pub fn xi(&self, j: usize, p: f64) -> (f64, f64) {
        let c = self.comp[j];
        if c == 0.0 {
            return (self.xi_ref[j], 0.0);
        }
        let xi = self.xi_ref[j] * (c * (p - self.p_ref[j])).exp();
        (xi, c * xi)
    }

    /// Mass density from molar density.
    pub fn rho_from_xi(&self, j: usize, xi: f64) -> f64 {
        self.rho_ref[j] * xi / self.xi_ref[j]
    }

    pub fn mu(&self, j: usize, p: f64) -> (f64, f64) {
        match &self.visc[j] {
            ViscFn::Constant(mu) => (*mu, 0.0),
            ViscFn::Table(t) => t.eval(0, p),
        }
    }
}
