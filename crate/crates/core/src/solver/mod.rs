//! Time stepping: the per-step stage machine, the FIM and IMPEC methods,
//! and domain-decomposed Newton as an initial guess for global FIM.

pub mod control;
mod fim;
mod impec;
mod step;

use serde::Serialize;
use thiserror::Error;

use crate::deck::{DeckModel, Method, SolverConfig, WellKind};
use crate::domain::{build_domains, exchange, partition, Domain, DomainError};
use crate::grid::{build_connections, build_grid, Grid, GridError};
use crate::linsys::BlockMatrix;
use crate::reservoir::{init_hydrostatic, BulkVarSet, Properties, ReservoirError, WellModel, WellRates, MAXP};

pub use control::TimeControl;

/// Schedule times closer than this (days) coincide.
pub const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MethodId {
    #[serde(rename = "FIM")]
    Fim,
    #[serde(rename = "IMPEC")]
    Impec,
    #[serde(rename = "FIMddm")]
    FimDdm,
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Reservoir(#[from] ReservoirError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("time step failed at t = {time} days ({reason}); dt would drop below {dt_min} days")]
    StepFailed { time: f64, dt_min: f64, reason: String },
}

/// Iteration counts and decisions of one time step.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct StepReport {
    pub step: usize,
    /// Start time of the step (days).
    pub time: f64,
    /// Accepted step length (days).
    pub dt: f64,
    pub methods: Vec<MethodId>,
    pub nr_global: usize,
    pub ls_global: usize,
    /// Local iterations along the critical path (largest group).
    pub nr_local: usize,
    pub ls_local: usize,
    /// Local iterations summed over groups.
    pub nr_local_sum: usize,
    pub ls_local_sum: usize,
    pub wasted_nr: usize,
    pub wasted_ls: usize,
    pub wasted_nr_local: usize,
    pub wasted_ls_local: usize,
    pub cuts: usize,
    /// Why each rejected attempt was cut.
    pub cut_reasons: Vec<String>,
    pub accepted: bool,
    /// Coupled groups of the accepted attempt (DDM methods only).
    pub groups: Vec<Vec<usize>>,
    /// Fraction of workers sitting in groups of two or more.
    pub coupled_fraction: f64,
    /// The local phase diverged and global FIM restarted from the last
    /// accepted state.
    pub ddm_fallback: bool,
    pub ls_fallback: bool,
    pub cfl: Option<f64>,
    pub max_dp: f64,
    pub max_ds: f64,
}

/// Run totals in the layout of the iteration statistics table. Totals
/// include wasted iterations.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunStats {
    pub steps: usize,
    pub cuts: usize,
    pub nr: usize,
    pub wasted_nr: usize,
    pub ls: usize,
    pub wasted_ls: usize,
    pub nr_local: usize,
    pub wasted_nr_local: usize,
    pub ls_local: usize,
    pub wasted_ls_local: usize,
}

impl RunStats {
    fn add(&mut self, r: &StepReport) {
        self.steps += 1;
        self.cuts += r.cuts;
        self.nr += r.nr_global;
        self.wasted_nr += r.wasted_nr;
        self.ls += r.ls_global;
        self.wasted_ls += r.wasted_ls;
        self.nr_local += r.nr_local;
        self.wasted_nr_local += r.wasted_nr_local;
        self.ls_local += r.ls_local;
        self.wasted_ls_local += r.wasted_ls_local;
    }

    pub fn ls_per_nr(&self) -> f64 {
        if self.nr == 0 {
            0.0
        } else {
            self.ls as f64 / self.nr as f64
        }
    }
}

/// One worker's state: its cells (interior then ghosts), wells and
/// linear-system rows.
#[derive(Debug, Clone)]
pub struct Worker {
    pub rank: usize,
    pub vars: BulkVarSet,
    pub wells: Vec<WellModel>,
    /// Rates of each well at the latest evaluated state.
    pub well_q: Vec<WellRates>,
    pub(crate) mat: BlockMatrix,
    pub(crate) res: Vec<f64>,
    pub(crate) row_scale: Vec<f64>,
}

/// Overrides applied on top of the deck's solver section.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub workers: Option<usize>,
    pub method: Option<Method>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WellReport {
    pub name: String,
    pub kind: WellKind,
    pub bhp: f64,
    /// Component rates (mol/s), positive into the reservoir.
    pub q: Vec<f64>,
}

/// Interior cell state for snapshots.
#[derive(Debug, Clone, PartialEq)]
pub struct CellRow {
    /// Natural grid index.
    pub global_index: usize,
    pub p: f64,
    pub s: Vec<f64>,
    pub n: Vec<f64>,
}

pub struct Simulation {
    pub model: DeckModel,
    pub cfg: SolverConfig,
    pub grid: Grid,
    pub props: Properties,
    pub owner: Vec<usize>,
    pub domains: Vec<Domain>,
    pub workers: Vec<Worker>,
    pub control: TimeControl,
    /// Days since start.
    pub time: f64,
    pub stats: RunStats,
    next_event: usize,
    steps: usize,
    report_due: bool,
    /// Cumulative well inflow per component (mol), over accepted steps.
    pub cum_well: Vec<f64>,
}

impl Simulation {
    pub fn new(model: DeckModel, opts: &RunOptions) -> Result<Simulation, SolverError> {
        let mut cfg = model.solver_cfg.clone();
        if let Some(w) = opts.workers {
            cfg.n_workers = w;
        }
        if let Some(m) = opts.method {
            cfg.method = m;
        }
        if cfg.n_workers == 0 {
            return Err(SolverError::Config("worker count must be at least 1".into()));
        }
        let grid = build_grid(&model)?;
        let conns = build_connections(&grid);
        let props = Properties::new(&model)?;
        let owner = partition(&grid, &model.wells, cfg.n_workers)?;
        let domains = build_domains(&grid, &conns, &owner, cfg.n_workers);
        let global = init_hydrostatic(&grid, &props, &model.init)?;
        let mut workers = Vec::with_capacity(cfg.n_workers);
        for d in &domains {
            let cells: Vec<usize> = d.interior.iter().chain(&d.ghosts).copied().collect();
            let mut vars = global.subset(&cells);
            vars.update(&props, 0..cells.len(), true)?;
            workers.push(Worker {
                rank: d.rank,
                vars,
                wells: Vec::new(),
                well_q: Vec::new(),
                mat: BlockMatrix::default(),
                res: Vec::new(),
                row_scale: Vec::new(),
            });
        }
        let mut specs: Vec<_> = model.wells.iter().collect();
        specs.sort_by(|a, b| a.name.cmp(&b.name));
        for spec in specs {
            let mut well = WellModel::new(spec, &grid)?;
            let Some(first) = well.perfs.first() else { continue };
            let rank = owner[first.cell];
            let d = &domains[rank];
            well.localize(|c| d.local_of(c).expect("well cells are interior"));
            workers[rank].wells.push(well);
        }
        let np = props.np();
        let control = TimeControl::new(&cfg);
        let mut sim = Simulation {
            model,
            cfg,
            grid,
            props,
            owner,
            domains,
            workers,
            control,
            time: 0.0,
            stats: RunStats::default(),
            next_event: 0,
            steps: 0,
            report_due: false,
            cum_well: vec![0.0; np],
        };
        while sim.next_event < sim.model.schedule.len() && sim.model.schedule[sim.next_event].time <= TIME_EPS {
            sim.apply_event(sim.next_event);
            sim.next_event += 1;
        }
        Ok(sim)
    }

    fn apply_event(&mut self, idx: usize) {
        let event = self.model.schedule[idx].clone();
        for ctl in &event.controls {
            for w in &mut self.workers {
                for well in &mut w.wells {
                    if well.name == ctl.well {
                        well.set_control(ctl, &self.props.pvt);
                    }
                }
            }
        }
    }

    pub fn n_workers(&self) -> usize {
        self.workers.len()
    }

    pub fn finished(&self) -> bool {
        self.next_event >= self.model.schedule.len()
    }

    /// Whether the last accepted step landed on a schedule time; cleared by
    /// the next call to [`Simulation::step`].
    pub fn at_report_time(&self) -> bool {
        self.report_due
    }

    /// Advances one accepted time step; `None` once the schedule is done.
    pub fn step(&mut self) -> Result<Option<StepReport>, SolverError> {
        self.report_due = false;
        if self.finished() {
            return Ok(None);
        }
        let boundary = self.model.schedule[self.next_event].time;
        let rep = self.go_one_step(boundary)?;
        self.stats.add(&rep);
        if boundary - self.time <= TIME_EPS {
            self.time = boundary;
            self.apply_event(self.next_event);
            self.next_event += 1;
            self.report_due = true;
        }
        Ok(Some(rep))
    }

    /// Runs to the end of the schedule.
    pub fn run(&mut self) -> Result<Vec<StepReport>, SolverError> {
        let mut out = Vec::new();
        while let Some(r) = self.step()? {
            out.push(r);
        }
        Ok(out)
    }

    /// Pore-volume weighted average pressure (Pa).
    pub fn field_pressure(&self) -> f64 {
        let mut pv = 0.0;
        let mut pp = 0.0;
        for (w, d) in self.workers.iter().zip(&self.domains) {
            let (mut a, mut b) = (0.0, 0.0);
            for c in 0..d.n_interior() {
                a += w.vars.p[c] * w.vars.vp[c];
                b += w.vars.vp[c];
            }
            pp += a;
            pv += b;
        }
        pp / pv
    }

    /// Moles in place per component.
    pub fn component_totals(&self) -> Vec<f64> {
        let np = self.props.np();
        let mut t = vec![0.0; np];
        for (w, d) in self.workers.iter().zip(&self.domains) {
            let part = w.vars.component_totals(0..d.n_interior());
            for i in 0..np {
                t[i] += part[i];
            }
        }
        t
    }

    /// Wells in name order with their latest rates.
    pub fn well_reports(&self) -> Vec<WellReport> {
        let np = self.props.np();
        let mut out: Vec<WellReport> = Vec::new();
        for w in &self.workers {
            for (k, well) in w.wells.iter().enumerate() {
                let (bhp, q) = match w.well_q.get(k) {
                    Some(r) => {
                        let t: [f64; MAXP] = r.total();
                        (r.bhp, t[..np].to_vec())
                    }
                    None => (well.bhp, vec![0.0; np]),
                };
                out.push(WellReport {
                    name: well.name.clone(),
                    kind: well.kind,
                    bhp,
                    q,
                });
            }
        }
        out.sort_by(|a, b| a.name.cmp(&b.name));
        out
    }

    /// Interior cells of each rank, in local order.
    pub fn cell_rows(&self, rank: usize) -> Vec<CellRow> {
        let w = &self.workers[rank];
        let d = &self.domains[rank];
        (0..d.n_interior())
            .map(|c| CellRow {
                global_index: self.grid.global_index[d.interior[c]],
                p: w.vars.p[c],
                s: w.vars.sat(c).to_vec(),
                n: w.vars.moles(c).to_vec(),
            })
            .collect()
    }

    /// Pressure and moles of every active cell, in active-cell order.
    pub fn gather_state(&self) -> (Vec<f64>, Vec<f64>) {
        let np = self.props.np();
        let n = self.grid.n_active;
        let mut p = vec![0.0; n];
        let mut m = vec![0.0; n * np];
        for (w, d) in self.workers.iter().zip(&self.domains) {
            for (c, &g) in d.interior.iter().enumerate() {
                p[g] = w.vars.p[c];
                m[g * np..(g + 1) * np].copy_from_slice(w.vars.moles(c));
            }
        }
        (p, m)
    }

    /// Saturations of every active cell, in active-cell order.
    pub fn gather_saturation(&self) -> Vec<f64> {
        let np = self.props.np();
        let mut s = vec![0.0; self.grid.n_active * np];
        for (w, d) in self.workers.iter().zip(&self.domains) {
            for (c, &g) in d.interior.iter().enumerate() {
                s[g * np..(g + 1) * np].copy_from_slice(w.vars.sat(c));
            }
        }
        s
    }

    /// Overwrites pressure and moles of every cell (active-cell order) and
    /// makes that state the last accepted one.
    pub fn set_state(&mut self, p: &[f64], n: &[f64]) -> Result<(), SolverError> {
        self.load_state(p, n, true)
    }

    /// Overwrites the current iterate only; the last accepted state is kept.
    pub fn set_iterate(&mut self, p: &[f64], n: &[f64]) -> Result<(), SolverError> {
        self.load_state(p, n, false)
    }

    fn load_state(&mut self, p: &[f64], n: &[f64], accept: bool) -> Result<(), SolverError> {
        let np = self.props.np();
        for (w, d) in self.workers.iter_mut().zip(&self.domains) {
            for l in 0..d.n_local() {
                let g = d.global_of(l);
                w.vars.p[l] = p[g];
                w.vars.n[l * np..(l + 1) * np].copy_from_slice(&n[g * np..(g + 1) * np]);
            }
            w.vars.update(&self.props, 0..d.n_local(), true)?;
            if accept {
                w.vars.accept();
            }
        }
        Ok(())
    }

    fn exchange_primaries(&mut self, members: Option<&[usize]>) {
        let np = self.props.np();
        let mut p: Vec<&mut [f64]> = self.workers.iter_mut().map(|w| w.vars.p.as_mut_slice()).collect();
        exchange(&self.domains, members, &mut p, 1);
        let mut n: Vec<&mut [f64]> = self.workers.iter_mut().map(|w| w.vars.n.as_mut_slice()).collect();
        exchange(&self.domains, members, &mut n, np);
    }
}
