//! One time step: attempts, cuts, and the Newton stage machine shared by
//! global and group-local solves.

use crate::domain::{build_coupling_graph, build_group_indexing, connected_components, exchange, mark_cells, GroupComm};
use crate::linsys::{solve, BlockMatrix, SolveOptions};
use crate::reservoir::{check_physical, PhysicalLimits, ReservoirError, Verdict};

use super::fim::{self, AssemblyCtx};
use super::impec;
use super::{Method, MethodId, Simulation, SolverError, StepReport};

pub(crate) const DAY: f64 = 86_400.0;

#[derive(Debug, Clone, Copy, Default)]
struct Counters {
    nr: usize,
    ls: usize,
    nr_local: usize,
    ls_local: usize,
    nr_local_sum: usize,
    ls_local_sum: usize,
}

#[derive(Debug)]
struct Cut {
    reason: String,
    /// Suggested retry length (days), when the failure knows better than
    /// the plain cut factor.
    retry_dt: Option<f64>,
}

impl Cut {
    fn new(reason: impl Into<String>) -> Cut {
        Cut {
            reason: reason.into(),
            retry_dt: None,
        }
    }
}

impl From<ReservoirError> for Cut {
    fn from(e: ReservoirError) -> Cut {
        Cut::new(e.to_string())
    }
}

enum Stage {
    Assemble,
    NonlinearCheck,
    LinearSolve,
    Update,
}

struct NewtonSpec<'a> {
    members: &'a [usize],
    /// Per member (same order): whether each ghost is a degree of freedom.
    ghost_dof: Vec<Vec<bool>>,
    tol: f64,
    max_iters: usize,
    ls_tol: f64,
}

impl Simulation {
    pub(crate) fn go_one_step(&mut self, boundary: f64) -> Result<StepReport, SolverError> {
        let mut rep = StepReport {
            step: self.steps,
            time: self.time,
            ..StepReport::default()
        };
        for w in &mut self.workers {
            for well in &mut w.wells {
                well.update_head_density(&w.vars);
            }
        }
        loop {
            let dt = self.control.step_size(self.time, boundary);
            let mut cnt = Counters::default();
            let result = match self.cfg.method {
                Method::Fim => self.attempt_fim(dt, &mut cnt, &mut rep),
                Method::Impec => self.attempt_impec(dt, &mut cnt, &mut rep),
                Method::CddmFim | Method::AddmFim => self.attempt_ddm(dt, &mut cnt, &mut rep),
            };
            rep.nr_global += cnt.nr;
            rep.ls_global += cnt.ls;
            rep.nr_local += cnt.nr_local;
            rep.ls_local += cnt.ls_local;
            rep.nr_local_sum += cnt.nr_local_sum;
            rep.ls_local_sum += cnt.ls_local_sum;
            match result {
                Ok(()) => {
                    rep.dt = dt;
                    rep.accepted = true;
                    self.accept(dt, &mut rep);
                    self.control.consecutive_cuts = 0;
                    return Ok(rep);
                }
                Err(cut) => {
                    rep.wasted_nr += cnt.nr;
                    rep.wasted_ls += cnt.ls;
                    rep.wasted_nr_local += cnt.nr_local;
                    rep.wasted_ls_local += cnt.ls_local;
                    rep.cuts += 1;
                    rep.cut_reasons.push(cut.reason.clone());
                    rep.methods.clear();
                    self.control.consecutive_cuts += 1;
                    let mut next = dt * self.control.cut_factor;
                    if let Some(r) = cut.retry_dt {
                        next = next.min(r);
                    }
                    self.restore_all()?;
                    if next < self.control.dt_min {
                        return Err(SolverError::StepFailed {
                            time: self.time,
                            dt_min: self.control.dt_min,
                            reason: cut.reason,
                        });
                    }
                    self.control.dt = next;
                }
            }
        }
    }

    fn accept(&mut self, dt: f64, rep: &mut StepReport) {
        let np = self.props.np();
        let mut max_dp = 0.0f64;
        let mut max_ds = 0.0f64;
        for (w, d) in self.workers.iter_mut().zip(&self.domains) {
            let v = &w.vars;
            for c in 0..d.n_interior() {
                max_dp = max_dp.max((v.p[c] - v.p_last[c]).abs());
                for j in 0..np {
                    max_ds = max_ds.max((v.s[c * np + j] - v.s_last[c * np + j]).abs());
                }
            }
            for (k, well) in w.wells.iter_mut().enumerate() {
                if let Some(r) = w.well_q.get(k) {
                    well.bhp = r.bhp;
                    let t = r.total();
                    for i in 0..np {
                        self.cum_well[i] += dt * DAY * t[i];
                    }
                }
            }
            w.vars.accept();
            w.vars.set_history_valid(true);
        }
        rep.max_dp = max_dp;
        rep.max_ds = max_ds;
        let mut next = self.control.predict(dt, max_dp, max_ds);
        if let Some(cfl) = rep.cfl {
            if cfl > 0.0 {
                next = next.min(dt * self.cfg.cfl_limit / cfl).max(self.control.dt_min);
            }
        }
        self.control.dt = next;
        self.time += dt;
        self.steps += 1;
    }

    /// Rolls every worker back to the last accepted state with fresh
    /// properties.
    pub(crate) fn restore_all(&mut self) -> Result<(), ReservoirError> {
        for w in &mut self.workers {
            w.vars.restore();
            let n = w.vars.p.len();
            w.vars.update(&self.props, 0..n, true)?;
        }
        Ok(())
    }

    fn all_members(&self) -> Vec<usize> {
        (0..self.workers.len()).collect()
    }

    fn global_spec<'a>(&self, members: &'a [usize]) -> NewtonSpec<'a> {
        NewtonSpec {
            members,
            ghost_dof: self.domains.iter().map(|d| vec![true; d.ghosts.len()]).collect(),
            tol: self.cfg.tol_nr_global,
            max_iters: self.cfg.max_nr_iters,
            ls_tol: self.cfg.tol_ls_global,
        }
    }

    fn attempt_fim(&mut self, dt: f64, cnt: &mut Counters, rep: &mut StepReport) -> Result<(), Cut> {
        self.restore_all()?;
        rep.methods = vec![MethodId::Fim];
        self.global_fim(dt, cnt, rep)
    }

    fn global_fim(&mut self, dt: f64, cnt: &mut Counters, rep: &mut StepReport) -> Result<(), Cut> {
        let members = self.all_members();
        let spec = self.global_spec(&members);
        let (mut nr, mut ls) = (0, 0);
        let out = self.newton(&spec, dt * DAY, &mut nr, &mut ls, rep);
        cnt.nr += nr;
        cnt.ls += ls;
        if !out? {
            return Err(Cut::new("Newton did not converge"));
        }
        self.finalize_all()
    }

    fn finalize_all(&mut self) -> Result<(), Cut> {
        let neg = self.cfg.neg_moles_rel;
        for (w, d) in self.workers.iter_mut().zip(&self.domains) {
            fim::finalize(w, d.n_interior(), neg);
        }
        self.exchange_primaries(None);
        for w in &mut self.workers {
            let n = w.vars.p.len();
            w.vars.update(&self.props, 0..n, true)?;
        }
        Ok(())
    }

    fn attempt_ddm(&mut self, dt: f64, cnt: &mut Counters, rep: &mut StepReport) -> Result<(), Cut> {
        self.restore_all()?;
        let n = self.workers.len();
        let groups: Vec<Vec<usize>> = if self.cfg.method == Method::AddmFim {
            let mut flags: Vec<Vec<bool>> = self
                .workers
                .iter()
                .zip(&self.domains)
                .map(|(w, d)| {
                    let mut f = mark_cells(&w.vars, d.n_interior(), self.cfg.ddm_mark_threshold);
                    f.resize(d.n_local(), false);
                    f
                })
                .collect();
            {
                let mut views: Vec<&mut [bool]> = flags.iter_mut().map(|f| f.as_mut_slice()).collect();
                exchange(&self.domains, None, &mut views, 1);
            }
            let g = build_coupling_graph(&self.domains, &flags).map_err(|e| Cut::new(e.to_string()))?;
            connected_components(&g)
        } else {
            (0..n).map(|r| vec![r]).collect()
        };
        let coupled: usize = groups.iter().filter(|g| g.len() > 1).map(Vec::len).sum();
        rep.coupled_fraction = coupled as f64 / n as f64;
        rep.groups = groups.clone();
        rep.methods = vec![MethodId::FimDdm];

        let mut diverged = false;
        for g in &groups {
            let info = build_group_indexing(&self.domains, g);
            let spec = NewtonSpec {
                members: g,
                ghost_dof: info.into_iter().map(|i| i.ghost_dof).collect(),
                tol: self.cfg.tol_nr_local,
                max_iters: self.cfg.max_nr_local,
                ls_tol: self.cfg.tol_ls_local,
            };
            let (mut nr, mut ls) = (0, 0);
            let out = self.newton(&spec, dt * DAY, &mut nr, &mut ls, rep);
            cnt.nr_local = cnt.nr_local.max(nr);
            cnt.ls_local = cnt.ls_local.max(ls);
            cnt.nr_local_sum += nr;
            cnt.ls_local_sum += ls;
            // an unconverged but usable local iterate is still handed off
            if out.is_err() {
                diverged = true;
                break;
            }
        }
        if diverged {
            rep.ddm_fallback = true;
            self.restore_all()?;
        } else {
            self.exchange_primaries(None);
            for w in &mut self.workers {
                let n = w.vars.p.len();
                w.vars.update(&self.props, 0..n, true)?;
            }
        }
        rep.methods.push(MethodId::Fim);
        self.global_fim(dt, cnt, rep)
    }

    /// Newton iterations on the members of one group. `Ok(true)` on
    /// convergence, `Ok(false)` when the iteration budget runs out, `Err`
    /// when an iterate is unusable.
    fn newton(
        &mut self,
        spec: &NewtonSpec,
        dt: f64,
        nr: &mut usize,
        ls: &mut usize,
        rep: &mut StepReport,
    ) -> Result<bool, Cut> {
        let np = self.props.np();
        let p_window = (self.cfg.p_min, self.cfg.p_max);
        let limits = PhysicalLimits {
            p_min: self.cfg.p_min,
            p_max: self.cfg.p_max,
            neg_moles_rel: self.cfg.neg_moles_rel,
        };
        let opts = SolveOptions {
            tol: spec.ls_tol,
            restart: self.cfg.ls_restart,
            max_iters: self.cfg.ls_max_iters,
        };
        let mut stage = Stage::Assemble;
        loop {
            stage = match stage {
                Stage::Assemble => {
                    for (k, &m) in spec.members.iter().enumerate() {
                        let ctx = AssemblyCtx {
                            props: &self.props,
                            dt,
                            p_window,
                            ghost_dof: &spec.ghost_dof[k],
                        };
                        fim::assemble(&mut self.workers[m], &self.domains[m], &ctx)?;
                    }
                    if *nr == 0 {
                        Stage::LinearSolve
                    } else {
                        Stage::NonlinearCheck
                    }
                }
                Stage::NonlinearCheck => {
                    let (mut mass, mut vol) = (0.0f64, 0.0f64);
                    for &m in spec.members {
                        let (a, b) = fim::residual_norms(&self.workers[m], np);
                        mass = mass.max(a);
                        vol = vol.max(b);
                    }
                    if mass <= spec.tol && vol <= spec.tol {
                        return Ok(true);
                    }
                    if *nr >= spec.max_iters {
                        return Ok(false);
                    }
                    Stage::LinearSolve
                }
                Stage::LinearSolve => {
                    let mut mats: Vec<BlockMatrix> = spec
                        .members
                        .iter()
                        .map(|&m| std::mem::take(&mut self.workers[m].mat))
                        .collect();
                    let comm = GroupComm {
                        domains: &self.domains,
                        members: spec.members,
                    };
                    let out = solve(&mut mats, &comm, &opts);
                    for (&m, mat) in spec.members.iter().zip(mats) {
                        self.workers[m].mat = mat;
                    }
                    *nr += 1;
                    match out {
                        Ok(r) => {
                            *ls += r.iterations;
                            rep.ls_fallback |= r.fallback;
                        }
                        Err(e) => {
                            if let crate::linsys::LinsysError::NoConvergence { iterations, .. } = e {
                                *ls += iterations;
                            }
                            return Err(Cut::new(format!("linear solver: {e}")));
                        }
                    }
                    Stage::Update
                }
                Stage::Update => {
                    let mut omega = 1.0f64;
                    for &m in spec.members {
                        let ni = self.domains[m].n_interior();
                        omega = omega.min(fim::chop_factor(&self.workers[m], ni, &self.props, self.cfg.sat_chop));
                    }
                    for &m in spec.members {
                        let ni = self.domains[m].n_interior();
                        fim::apply_update(&mut self.workers[m], ni, omega, self.cfg.neg_moles_rel);
                    }
                    self.exchange_primaries(Some(spec.members));
                    let mut verdicts = Vec::with_capacity(spec.members.len());
                    for &m in spec.members {
                        let w = &mut self.workers[m];
                        let ni = self.domains[m].n_interior();
                        let nl = w.vars.p.len();
                        let v = check_physical(&w.vars, ni, &limits);
                        if v.is_ok() {
                            w.vars.update(&self.props, 0..nl, true)?;
                        }
                        verdicts.push(v);
                    }
                    if let Verdict::Cut(why) = Verdict::all(verdicts) {
                        return Err(Cut::new(why));
                    }
                    Stage::Assemble
                }
            };
        }
    }

    fn attempt_impec(&mut self, dt: f64, cnt: &mut Counters, rep: &mut StepReport) -> Result<(), Cut> {
        self.restore_all()?;
        rep.methods = vec![MethodId::Impec];
        let dt_s = dt * DAY;
        let p_window = (self.cfg.p_min, self.cfg.p_max);
        let mut frozen = Vec::with_capacity(self.workers.len());
        for (w, d) in self.workers.iter_mut().zip(&self.domains) {
            let fr = impec::freeze(w, d, &self.props, p_window)?;
            impec::assemble_pressure(w, d, &fr, dt_s);
            frozen.push(fr);
        }
        let members = self.all_members();
        let mut mats: Vec<BlockMatrix> = self.workers.iter_mut().map(|w| std::mem::take(&mut w.mat)).collect();
        let opts = SolveOptions {
            tol: self.cfg.tol_ls_global,
            restart: self.cfg.ls_restart,
            max_iters: self.cfg.ls_max_iters,
        };
        let out = solve(
            &mut mats,
            &GroupComm {
                domains: &self.domains,
                members: &members,
            },
            &opts,
        );
        for (w, m) in self.workers.iter_mut().zip(mats) {
            w.mat = m;
        }
        cnt.nr += 1;
        match out {
            Ok(r) => {
                cnt.ls += r.iterations;
                rep.ls_fallback |= r.fallback;
            }
            Err(e) => {
                if let crate::linsys::LinsysError::NoConvergence { iterations, .. } = e {
                    cnt.ls += iterations;
                }
                return Err(Cut::new(format!("linear solver: {e}")));
            }
        }
        for (w, d) in self.workers.iter_mut().zip(&self.domains) {
            for c in 0..d.n_interior() {
                w.vars.p[c] += w.mat.u[c];
            }
        }
        self.exchange_primaries(None);
        let mut cfl = 0.0f64;
        for ((w, d), fr) in self.workers.iter_mut().zip(&self.domains).zip(&frozen) {
            cfl = cfl.max(impec::transport(w, d, fr, dt_s, self.cfg.neg_moles_rel));
        }
        rep.cfl = Some(cfl);
        if cfl > self.cfg.cfl_limit {
            return Err(Cut {
                reason: format!("CFL number {cfl:.3} above limit"),
                retry_dt: Some(0.9 * dt * self.cfg.cfl_limit / cfl),
            });
        }
        self.exchange_primaries(None);
        let limits = PhysicalLimits {
            p_min: self.cfg.p_min,
            p_max: self.cfg.p_max,
            neg_moles_rel: self.cfg.neg_moles_rel,
        };
        let mut verdicts = Vec::new();
        for (w, d) in self.workers.iter_mut().zip(&self.domains) {
            let v = check_physical(&w.vars, d.n_interior(), &limits);
            if v.is_ok() {
                let n = w.vars.p.len();
                w.vars.update(&self.props, 0..n, true)?;
            }
            verdicts.push(v);
        }
        if let Verdict::Cut(why) = Verdict::all(verdicts) {
            return Err(Cut::new(why));
        }
        Ok(())
    }

    /// Unscaled FIM residual at the current state for a step of `dt` days,
    /// in active-cell order with `np + 1` rows per cell.
    pub fn fim_residual(&mut self, dt: f64) -> Result<Vec<f64>, SolverError> {
        let (r, _) = self.fim_system(dt)?;
        Ok(r)
    }

    /// Unscaled dense FIM Jacobian, row-major, matching [`Simulation::fim_residual`].
    pub fn fim_jacobian(&mut self, dt: f64) -> Result<Vec<f64>, SolverError> {
        let (_, j) = self.fim_system(dt)?;
        Ok(j)
    }

    fn fim_system(&mut self, dt: f64) -> Result<(Vec<f64>, Vec<f64>), SolverError> {
        let nb = self.props.np() + 1;
        let n = self.grid.n_active * nb;
        let mut res = vec![0.0; n];
        let mut jac = vec![0.0; n * n];
        for w in &mut self.workers {
            for well in &mut w.wells {
                well.update_head_density(&w.vars);
            }
        }
        for r in 0..self.workers.len() {
            let d = &self.domains[r];
            let dof = vec![true; d.ghosts.len()];
            let ctx = AssemblyCtx {
                props: &self.props,
                dt: dt * DAY,
                p_window: (self.cfg.p_min, self.cfg.p_max),
                ghost_dof: &dof,
            };
            let w = &mut self.workers[r];
            fim::assemble(w, d, &ctx)?;
            let csr = w.mat.to_csr();
            for row in 0..d.n_interior() {
                let g = d.global_of(row);
                for e in 0..nb {
                    res[g * nb + e] = w.res[row * nb + e];
                }
                for k in csr.row_ptr[row]..csr.row_ptr[row + 1] {
                    let gc = d.global_of(csr.col_idx[k]);
                    let blk = csr.block(k);
                    for e in 0..nb {
                        let s = w.row_scale[row * nb + e];
                        for v in 0..nb {
                            jac[(g * nb + e) * n + gc * nb + v] += blk[e * nb + v] / s;
                        }
                    }
                }
            }
        }
        Ok((res, jac))
    }
}
