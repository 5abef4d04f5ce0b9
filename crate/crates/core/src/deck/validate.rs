use std::fmt;

use serde::Serialize;

use super::{ControlMode, DeckModel, Phase, Viscosity, WellKind};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub keyword: String,
    pub cell: Option<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.cell {
            Some(c) => write!(f, "{} cell {}: {}", self.keyword, c, self.message),
            None => write!(f, "{}: {}", self.keyword, self.message),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn contains(&self, keyword: &str, cell: Option<usize>, message: &str) -> bool {
        self.violations
            .iter()
            .any(|v| v.keyword == keyword && v.cell == cell && v.message.contains(message))
    }

    fn push(&mut self, keyword: &str, cell: Option<usize>, message: impl Into<String>) {
        self.violations.push(Violation {
            keyword: keyword.to_string(),
            cell,
            message: message.into(),
        });
    }
}

/// Collects every invariant violation in `model`. Cell-property checks apply
/// to active cells only; inactive cells may carry placeholder values.
pub fn validate_deck(model: &DeckModel) -> ValidationReport {
    let mut r = ValidationReport::default();
    let n = model.n_cells();
    let (nx, ny, nz) = model.dimens;

    for (kw, vals, expected) in [
        ("DX", &model.cell_sizes.dx, nx),
        ("DY", &model.cell_sizes.dy, ny),
        ("DZ", &model.cell_sizes.dz, nz),
    ] {
        if vals.len() != expected {
            r.push(kw, None, format!("expected {expected} values, got {}", vals.len()));
        }
        for (i, &v) in vals.iter().enumerate() {
            if !(v > 0.0) {
                r.push(kw, Some(i), "must be > 0");
            }
        }
    }

    let arrays_ok = [&model.poro, &model.permx, &model.permy, &model.permz]
        .iter()
        .map(|a| a.len())
        .chain(std::iter::once(model.actnum.len()))
        .all(|len| len == n);
    if !arrays_ok {
        for (kw, len) in [
            ("PORO", model.poro.len()),
            ("PERMX", model.permx.len()),
            ("PERMY", model.permy.len()),
            ("PERMZ", model.permz.len()),
            ("ACTNUM", model.actnum.len()),
        ] {
            if len != n {
                r.push(kw, None, format!("expected {n} values, got {len}"));
            }
        }
    } else {
        let mut any_active = false;
        for c in 0..n {
            match model.actnum[c] {
                0 => continue,
                1 => any_active = true,
                v => {
                    r.push("ACTNUM", Some(c), format!("must be 0 or 1, got {v}"));
                    continue;
                }
            }
            let phi = model.poro[c];
            if !(phi > 0.0 && phi <= 1.0) {
                r.push("PORO", Some(c), "must be in (0,1]");
            }
            for (kw, a) in [("PERMX", &model.permx), ("PERMY", &model.permy), ("PERMZ", &model.permz)] {
                if !(a[c] > 0.0) {
                    r.push(kw, Some(c), "must be > 0");
                }
            }
        }
        if !any_active {
            r.push("ACTNUM", None, "no active cells");
        }
    }

    validate_fluid(model, &mut r);
    validate_sat(model, &mut r);

    if !(model.rock.compressibility >= 0.0) {
        r.push("ROCK", None, "compressibility must be >= 0");
    }
    if !(model.rock.p_ref > 0.0) {
        r.push("ROCK", None, "reference pressure must be > 0");
    }
    let init = &model.init;
    if !(init.ref_pressure > 0.0) {
        r.push("INIT", None, "reference pressure must be > 0");
    }
    if !(0.0..1.0).contains(&init.swi) {
        r.push("INIT", None, "SWI must be in [0,1)");
    }
    if let (Some(woc), Some(goc)) = (init.woc, init.goc) {
        if goc > woc {
            r.push("INIT", None, "GOC must not lie below WOC");
        }
    }

    validate_wells(model, &mut r);
    validate_schedule(model, &mut r);
    validate_solver(model, &mut r);
    r
}

fn validate_fluid(model: &DeckModel, r: &mut ValidationReport) {
    let f = &model.fluid;
    if f.props.len() != f.phases.len() || f.component_names.len() != f.phases.len() {
        r.push("FLUID", None, "one component and one property record per phase required");
    }
    for p in &f.props {
        let kw = "FLUID";
        if !(p.xi_ref > 0.0) || !(p.rho_ref > 0.0) {
            r.push(kw, None, format!("{}: densities must be > 0", p.phase));
        }
        if !(p.compressibility >= 0.0) {
            r.push(kw, None, format!("{}: compressibility must be >= 0", p.phase));
        }
        if !(p.p_ref > 0.0) {
            r.push(kw, None, format!("{}: reference pressure must be > 0", p.phase));
        }
        match &p.viscosity {
            Viscosity::Constant(mu) => {
                if !(*mu > 0.0) {
                    r.push(kw, None, format!("{}: viscosity must be > 0", p.phase));
                }
            }
            Viscosity::Table(rows) => {
                if rows.iter().any(|&(_, mu)| !(mu > 0.0)) {
                    r.push("VISCTAB", None, format!("{}: viscosity must be > 0", p.phase));
                }
                if rows.windows(2).any(|w| !(w[1].0 > w[0].0)) {
                    r.push("VISCTAB", None, format!("{}: pressure must be strictly increasing", p.phase));
                }
            }
        }
    }
}

fn validate_sat(model: &DeckModel, r: &mut ValidationReport) {
    let phases = &model.fluid.phases;
    let has = |p: Phase| phases.contains(&p);
    let required: Vec<&str> = match (has(Phase::Water), has(Phase::Oil), has(Phase::Gas)) {
        (true, true, true) => vec!["SWOF", "SGOF"],
        (true, true, false) => vec!["SWOF"],
        (false, true, true) => vec!["SGOF"],
        (true, false, true) => vec!["SGWF"],
        _ => vec![],
    };
    for kw in &required {
        if !model.sat_table.curves.iter().any(|c| c.keyword() == *kw) {
            r.push(kw, None, "saturation table required for this phase set");
        }
    }
    for curve in &model.sat_table.curves {
        let kw = curve.keyword();
        if !required.contains(&kw) {
            r.push(kw, None, "table does not match the phase set");
        }
        if curve.rows.windows(2).any(|w| !(w[1].s > w[0].s)) {
            r.push(kw, None, "saturation must be strictly increasing");
        }
        if curve.rows.windows(2).any(|w| w[1].kr_displacing < w[0].kr_displacing) {
            r.push(kw, None, "displacing-phase kr must be non-decreasing");
        }
        for row in &curve.rows {
            if !(0.0..=1.0).contains(&row.s) {
                r.push(kw, None, "saturation must be in [0,1]");
            }
            if !(0.0..=1.0).contains(&row.kr_displacing) || !(0.0..=1.0).contains(&row.kr_displaced) {
                r.push(kw, None, "kr must be in [0,1]");
            }
        }
    }
}

fn validate_wells(model: &DeckModel, r: &mut ValidationReport) {
    let (nx, ny, nz) = model.dimens;
    for (wi, well) in model.wells.iter().enumerate() {
        if model.wells[..wi].iter().any(|w| w.name == well.name) {
            r.push("WELSPECS", None, format!("{}: duplicate well name", well.name));
        }
        if !(well.radius > 0.0) {
            r.push("WELSPECS", None, format!("{}: radius must be > 0", well.name));
        }
        if well.perforations.is_empty() {
            r.push("COMPDAT", None, format!("{}: no perforations", well.name));
        }
        for &(i, j, k) in &well.perforations {
            if i >= nx || j >= ny || k >= nz {
                r.push("COMPDAT", None, format!("{}: perforation ({},{},{}) outside grid", well.name, i + 1, j + 1, k + 1));
                continue;
            }
            let c = model.flat_index(i, j, k);
            if model.actnum.get(c) != Some(&1) {
                r.push("COMPDAT", Some(c), format!("{}: perforated cell is inactive", well.name));
            }
        }
        let mut dedup = well.perforations.clone();
        dedup.sort_unstable();
        dedup.dedup();
        if dedup.len() != well.perforations.len() {
            r.push("COMPDAT", None, format!("{}: cell perforated twice", well.name));
        }
    }
}

fn validate_schedule(model: &DeckModel, r: &mut ValidationReport) {
    let s = &model.schedule;
    if s.is_empty() {
        r.push("SCHEDULE", None, "no TIME events");
        return;
    }
    if s[0].time < 0.0 {
        r.push("SCHEDULE", None, "times must be >= 0");
    }
    for w in s.windows(2) {
        if !(w[1].time > w[0].time) {
            r.push(
                "SCHEDULE",
                None,
                format!("times must be strictly increasing ({} then {})", w[0].time, w[1].time),
            );
        }
    }
    if !(model.end_time() > 0.0) {
        r.push("SCHEDULE", None, "last TIME must be > 0");
    }
    let mut controlled = vec![false; model.wells.len()];
    for ev in s {
        for ctl in &ev.controls {
            let Some(wi) = model.wells.iter().position(|w| w.name == ctl.well) else {
                r.push("WCONTROL", None, format!("{}: unknown well", ctl.well));
                continue;
            };
            let well = &model.wells[wi];
            if ev.time == s[0].time {
                controlled[wi] = true;
            }
            if let Some(ph) = ctl.phase {
                if !model.fluid.phases.contains(&ph) {
                    r.push("WCONTROL", None, format!("{}: phase {ph} not in PHASES", ctl.well));
                }
            }
            if well.kind == WellKind::Injector && ctl.phase.is_none() {
                r.push("WCONTROL", None, format!("{}: injectors need an injected phase", ctl.well));
            }
            match ctl.mode {
                ControlMode::Bhp(p) if !(p > 0.0) => {
                    r.push("WCONTROL", None, format!("{}: BHP must be > 0", ctl.well));
                }
                ControlMode::Rate(q) if !(q >= 0.0) => {
                    r.push("WCONTROL", None, format!("{}: rate magnitude must be >= 0", ctl.well));
                }
                _ => {}
            }
        }
    }
    for (wi, ok) in controlled.iter().enumerate() {
        if !ok {
            r.push(
                "WCONTROL",
                None,
                format!("{}: no control at the first TIME", model.wells[wi].name),
            );
        }
    }
}

fn validate_solver(model: &DeckModel, r: &mut ValidationReport) {
    let c = &model.solver_cfg;
    for (name, v) in [
        ("TOL_NR", c.tol_nr_global),
        ("TOL_LS", c.tol_ls_global),
        ("TOL_NR_LOCAL", c.tol_nr_local),
        ("TOL_LS_LOCAL", c.tol_ls_local),
    ] {
        if !(v > 0.0 && v < 1.0) {
            r.push("SOLVER", None, format!("{name} must be in (0,1)"));
        }
    }
    if c.tol_nr_local < c.tol_nr_global {
        r.push("SOLVER", None, "TOL_NR_LOCAL must be >= TOL_NR");
    }
    if !(c.dt_min > 0.0 && c.dt_min <= c.dt_init && c.dt_init <= c.dt_max) {
        r.push("SOLVER", None, "DT requires 0 < min <= init <= max");
    }
    if c.n_workers < 1 {
        r.push("SOLVER", None, "WORKERS must be >= 1");
    }
    if c.max_nr_iters < 1 || c.max_nr_local < 1 || c.ls_max_iters < 1 || c.ls_restart < 1 {
        r.push("SOLVER", None, "iteration limits must be >= 1");
    }
    if !(c.ddm_mark_threshold >= 0.0) {
        r.push("SOLVER", None, "MARK must be >= 0");
    }
    if !(c.cut_factor > 0.0 && c.cut_factor < 1.0) {
        r.push("SOLVER", None, "CUT must be in (0,1)");
    }
    if !(c.dt_growth >= 1.0) || !(c.dp_target > 0.0) || !(c.ds_target > 0.0) {
        r.push("SOLVER", None, "DT_GROWTH >= 1 and positive change targets required");
    }
    if !(c.sat_chop > 0.0) || !(c.cfl_limit > 0.0) {
        r.push("SOLVER", None, "SAT_CHOP and CFL must be > 0");
    }
    if !(c.p_min > 0.0 && c.p_min < c.p_max) {
        r.push("SOLVER", None, "P_WINDOW requires 0 < min < max");
    }
}
