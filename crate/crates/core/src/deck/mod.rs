//! Keyword deck: the in-memory case description and its text format.
//!
//! The text dialect is line oriented. A keyword stands alone on a line and is
//! followed by records of whitespace separated tokens, each record closed by
//! `/`. Keywords that take several records are closed by an empty record.
//! `--` starts a comment and `N*value` repeats a value `N` times. The full
//! grammar is documented in `docs/deck-format.md`.
//!
//! All quantities are stored in SI units (Pa, m, m², Pa·s, mol). Times stay
//! in days, the unit the schedule and time-step controls are written in.

mod parser;
mod serialize;
mod validate;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use parser::{parse_deck, DeckError};
pub use serialize::serialize_deck;
pub use validate::{validate_deck, ValidationReport, Violation};

/// Seconds per day.
pub const DAY: f64 = 86_400.0;
/// Pascal per bar.
pub const BAR: f64 = 1.0e5;
/// Square metres per millidarcy.
pub const MILLIDARCY: f64 = 9.869_233e-16;
/// Pascal-seconds per centipoise.
pub const CENTIPOISE: f64 = 1.0e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Phase {
    Water,
    Oil,
    Gas,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::Water, Phase::Oil, Phase::Gas];

    pub fn keyword(self) -> &'static str {
        match self {
            Phase::Water => "WATER",
            Phase::Oil => "OIL",
            Phase::Gas => "GAS",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Phase> {
        match s {
            "WATER" => Some(Phase::Water),
            "OIL" => Some(Phase::Oil),
            "GAS" => Some(Phase::Gas),
            _ => None,
        }
    }

    /// Single-letter tag used in output column names.
    pub fn letter(self) -> char {
        match self {
            Phase::Water => 'W',
            Phase::Oil => 'O',
            Phase::Gas => 'G',
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UnitSystem {
    /// bar, mD, cP, 1/bar, surface m³/day.
    Field,
    /// Pa, m², Pa·s, 1/Pa, surface m³/s.
    Si,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSizes {
    pub dx: Vec<f64>,
    pub dy: Vec<f64>,
    pub dz: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Viscosity {
    Constant(f64),
    /// `(pressure, viscosity)` rows, pressure strictly increasing.
    Table(Vec<(f64, f64)>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseProps {
    pub phase: Phase,
    /// Pressure at which `xi_ref` and `rho_ref` hold.
    pub p_ref: f64,
    /// Molar density at `p_ref` (mol/m³); also the surface-condition density.
    pub xi_ref: f64,
    /// Mass density at `p_ref` (kg/m³).
    pub rho_ref: f64,
    pub compressibility: f64,
    pub viscosity: Viscosity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluidSpec {
    pub phases: Vec<Phase>,
    /// One entry per phase, in `phases` order.
    pub props: Vec<PhaseProps>,
    /// One component per phase (dead-oil convention).
    pub component_names: Vec<String>,
}

impl FluidSpec {
    pub fn n_phases(&self) -> usize {
        self.phases.len()
    }

    pub fn index_of(&self, phase: Phase) -> Option<usize> {
        self.phases.iter().position(|&p| p == phase)
    }

    /// Phase whose pressure is the primary unknown: oil, else water, else gas.
    pub fn reference_phase(&self) -> Phase {
        [Phase::Oil, Phase::Water, Phase::Gas]
            .into_iter()
            .find(|p| self.phases.contains(p))
            .unwrap_or(Phase::Water)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SatRow {
    pub s: f64,
    pub kr_displacing: f64,
    pub kr_displaced: f64,
    /// Pressure offset of the displacing phase over the displaced phase.
    pub pc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SatCurve {
    pub displacing: Phase,
    pub displaced: Phase,
    pub rows: Vec<SatRow>,
}

impl SatCurve {
    pub fn keyword(&self) -> &'static str {
        match (self.displacing, self.displaced) {
            (Phase::Water, Phase::Oil) => "SWOF",
            (Phase::Gas, Phase::Oil) => "SGOF",
            (Phase::Gas, Phase::Water) => "SGWF",
            _ => "SAT?",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SatTable {
    pub curves: Vec<SatCurve>,
}

impl SatTable {
    pub fn curve(&self, displacing: Phase, displaced: Phase) -> Option<&SatCurve> {
        self.curves
            .iter()
            .find(|c| c.displacing == displacing && c.displaced == displaced)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RockSpec {
    pub p_ref: f64,
    pub compressibility: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitSpec {
    pub ref_depth: f64,
    pub ref_pressure: f64,
    /// Depth below which cells start fully water saturated.
    pub woc: Option<f64>,
    /// Depth above which the hydrocarbon phase is gas.
    pub goc: Option<f64>,
    /// Water saturation above the water contact.
    pub swi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WellKind {
    Injector,
    Producer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WellSpec {
    pub name: String,
    pub kind: WellKind,
    /// Perforated cells as zero-based `(i, j, k)`.
    pub perforations: Vec<(usize, usize, usize)>,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ControlMode {
    /// Bottom-hole pressure target (Pa) at the top perforation.
    Bhp(f64),
    /// Surface volumetric rate magnitude (m³/s).
    Rate(f64),
    Shut,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WellControl {
    pub well: String,
    /// Injected phase for injectors; counted phase for producer rate
    /// targets, `None` meaning all phases.
    pub phase: Option<Phase>,
    pub mode: ControlMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEvent {
    /// Days from the start of the run.
    pub time: f64,
    pub controls: Vec<WellControl>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Fim,
    Impec,
    CddmFim,
    AddmFim,
}

impl Method {
    pub fn keyword(self) -> &'static str {
        match self {
            Method::Fim => "FIM",
            Method::Impec => "IMPEC",
            Method::CddmFim => "CDDM_FIM",
            Method::AddmFim => "ADDM_FIM",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Method> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "FIM" => Some(Method::Fim),
            "IMPEC" => Some(Method::Impec),
            "CDDM_FIM" | "CDDM" => Some(Method::CddmFim),
            "ADDM_FIM" | "ADDM" => Some(Method::AddmFim),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub method: Method,
    pub tol_nr_global: f64,
    pub tol_ls_global: f64,
    pub tol_nr_local: f64,
    pub tol_ls_local: f64,
    /// Days.
    pub dt_init: f64,
    pub dt_max: f64,
    pub dt_min: f64,
    pub max_nr_iters: usize,
    pub max_nr_local: usize,
    pub ddm_mark_threshold: f64,
    pub n_workers: usize,
    pub ls_max_iters: usize,
    pub ls_restart: usize,
    /// Pressure change per step the time-step predictor aims for (Pa).
    pub dp_target: f64,
    pub ds_target: f64,
    pub dt_growth: f64,
    pub cut_factor: f64,
    /// Largest saturation change one Newton update may cause.
    pub sat_chop: f64,
    /// IMPEC steps with a larger CFL number are rejected.
    pub cfl_limit: f64,
    pub p_min: f64,
    pub p_max: f64,
    /// Negative moles above `-neg_moles_rel * N_cell` are clamped to zero.
    pub neg_moles_rel: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            method: Method::Fim,
            tol_nr_global: 1e-4,
            tol_ls_global: 1e-4,
            tol_nr_local: 1e-2,
            tol_ls_local: 1e-2,
            dt_init: 0.1,
            dt_max: 10.0,
            dt_min: 1e-6,
            max_nr_iters: 10,
            max_nr_local: 10,
            ddm_mark_threshold: 5e-3,
            n_workers: 1,
            ls_max_iters: 200,
            ls_restart: 30,
            dp_target: 2.0e6,
            ds_target: 0.1,
            dt_growth: 2.0,
            cut_factor: 0.5,
            sat_chop: 0.2,
            cfl_limit: 1.0,
            p_min: 1.0e3,
            p_max: 2.0e8,
            neg_moles_rel: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeckModel {
    pub dimens: (usize, usize, usize),
    pub cell_sizes: CellSizes,
    pub depth_top: f64,
    pub poro: Vec<f64>,
    pub permx: Vec<f64>,
    pub permy: Vec<f64>,
    pub permz: Vec<f64>,
    pub actnum: Vec<u8>,
    pub fluid: FluidSpec,
    pub sat_table: SatTable,
    pub rock: RockSpec,
    pub init: InitSpec,
    pub wells: Vec<WellSpec>,
    pub schedule: Vec<ScheduleEvent>,
    pub solver_cfg: SolverConfig,
}

impl DeckModel {
    pub fn n_cells(&self) -> usize {
        let (nx, ny, nz) = self.dimens;
        nx * ny * nz
    }

    /// Natural (i fastest) flattened index.
    pub fn flat_index(&self, i: usize, j: usize, k: usize) -> usize {
        let (nx, ny, _) = self.dimens;
        i + nx * (j + ny * k)
    }

    pub fn end_time(&self) -> f64 {
        self.schedule.last().map_or(0.0, |e| e.time)
    }
}
