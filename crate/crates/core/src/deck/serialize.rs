use std::fmt::Write;

use super::{ControlMode, DeckModel, Viscosity, WellKind};

/// Writes a deck in `UNITS SI` so that reparsing reproduces `model` exactly.
pub fn serialize_deck(model: &DeckModel) -> String {
    let mut out = String::new();
    let w = &mut out;
    let _ = writeln!(w, "UNITS\n SI /");
    let (nx, ny, nz) = model.dimens;
    let _ = writeln!(w, "DIMENS\n {nx} {ny} {nz} /");
    array(w, "DX", &model.cell_sizes.dx);
    array(w, "DY", &model.cell_sizes.dy);
    array(w, "DZ", &model.cell_sizes.dz);
    let _ = writeln!(w, "TOPS\n {:e} /", model.depth_top);
    array(w, "PORO", &model.poro);
    array(w, "PERMX", &model.permx);
    array(w, "PERMY", &model.permy);
    array(w, "PERMZ", &model.permz);
    let act: Vec<String> = model.actnum.iter().map(|v| v.to_string()).collect();
    record_runs(w, "ACTNUM", &act);

    let names: Vec<&str> = model.fluid.phases.iter().map(|p| p.keyword()).collect();
    let _ = writeln!(w, "PHASES\n {} /", names.join(" "));
    let _ = writeln!(w, "FLUID");
    let mut tables = Vec::new();
    for p in &model.fluid.props {
        let mu = match &p.viscosity {
            Viscosity::Constant(mu) => *mu,
            Viscosity::Table(rows) => {
                tables.push((p.phase, rows));
                rows[0].1
            }
        };
        let _ = writeln!(
            w,
            " {} {:e} {:e} {:e} {:e} {:e} /",
            p.phase.keyword(),
            p.p_ref,
            p.xi_ref,
            p.rho_ref,
            p.compressibility,
            mu
        );
    }
    let _ = writeln!(w, "/");
    if !tables.is_empty() {
        let _ = writeln!(w, "VISCTAB");
        for (phase, rows) in tables {
            let _ = write!(w, " {}", phase.keyword());
            for (p, mu) in rows {
                let _ = write!(w, " {p:e} {mu:e}");
            }
            let _ = writeln!(w, " /");
        }
        let _ = writeln!(w, "/");
    }
    for curve in &model.sat_table.curves {
        let _ = writeln!(w, "{}", curve.keyword());
        for r in &curve.rows {
            let _ = writeln!(
                w,
                " {:e} {:e} {:e} {:e} /",
                r.s, r.kr_displacing, r.kr_displaced, r.pc
            );
        }
        let _ = writeln!(w, "/");
    }
    let _ = writeln!(
        w,
        "ROCK\n {:e} {:e} /",
        model.rock.p_ref, model.rock.compressibility
    );

    let init = &model.init;
    let _ = writeln!(w, "INIT");
    let _ = writeln!(w, " DEPTH {:e} /", init.ref_depth);
    let _ = writeln!(w, " PRESSURE {:e} /", init.ref_pressure);
    if let Some(v) = init.woc {
        let _ = writeln!(w, " WOC {v:e} /");
    }
    if let Some(v) = init.goc {
        let _ = writeln!(w, " GOC {v:e} /");
    }
    let _ = writeln!(w, " SWI {:e} /\n/", init.swi);

    if !model.wells.is_empty() {
        let _ = writeln!(w, "WELSPECS");
        for well in &model.wells {
            let kind = match well.kind {
                WellKind::Injector => "INJ",
                WellKind::Producer => "PROD",
            };
            let _ = writeln!(w, " {} {} {:e} /", well.name, kind, well.radius);
        }
        let _ = writeln!(w, "/\nCOMPDAT");
        for well in &model.wells {
            for &(i, j, k) in &well.perforations {
                let _ = writeln!(
                    w,
                    " {} {} {} {} {} /",
                    well.name,
                    i + 1,
                    j + 1,
                    k + 1,
                    k + 1
                );
            }
        }
        let _ = writeln!(w, "/");
    }

    let c = &model.solver_cfg;
    let _ = writeln!(w, "SOLVER");
    let _ = writeln!(w, " METHOD {} /", c.method.keyword());
    let _ = writeln!(w, " TOL_NR {:e} /", c.tol_nr_global);
    let _ = writeln!(w, " TOL_LS {:e} /", c.tol_ls_global);
    let _ = writeln!(w, " TOL_NR_LOCAL {:e} /", c.tol_nr_local);
    let _ = writeln!(w, " TOL_LS_LOCAL {:e} /", c.tol_ls_local);
    let _ = writeln!(w, " DT {:e} {:e} {:e} /", c.dt_init, c.dt_max, c.dt_min);
    let _ = writeln!(w, " MAX_NR {} /", c.max_nr_iters);
    let _ = writeln!(w, " MAX_NR_LOCAL {} /", c.max_nr_local);
    let _ = writeln!(w, " MARK {:e} /", c.ddm_mark_threshold);
    let _ = writeln!(w, " WORKERS {} /", c.n_workers);
    let _ = writeln!(w, " LS_MAX {} /", c.ls_max_iters);
    let _ = writeln!(w, " LS_RESTART {} /", c.ls_restart);
    let _ = writeln!(w, " DP_TARGET {:e} /", c.dp_target);
    let _ = writeln!(w, " DS_TARGET {:e} /", c.ds_target);
    let _ = writeln!(w, " DT_GROWTH {:e} /", c.dt_growth);
    let _ = writeln!(w, " CUT {:e} /", c.cut_factor);
    let _ = writeln!(w, " SAT_CHOP {:e} /", c.sat_chop);
    let _ = writeln!(w, " CFL {:e} /", c.cfl_limit);
    let _ = writeln!(w, " P_WINDOW {:e} {:e} /", c.p_min, c.p_max);
    let _ = writeln!(w, " NEG_MOLES {:e} /\n/", c.neg_moles_rel);

    let _ = writeln!(w, "SCHEDULE");
    for ev in &model.schedule {
        let _ = writeln!(w, "TIME\n {:e} /", ev.time);
        if ev.controls.is_empty() {
            continue;
        }
        let _ = writeln!(w, "WCONTROL");
        for ctl in &ev.controls {
            let phase = ctl.phase.map_or("ALL", |p| p.keyword());
            match ctl.mode {
                ControlMode::Bhp(v) => {
                    let _ = writeln!(w, " {} {} BHP {:e} /", ctl.well, phase, v);
                }
                ControlMode::Rate(v) => {
                    let _ = writeln!(w, " {} {} RATE {:e} /", ctl.well, phase, v);
                }
                ControlMode::Shut => {
                    let _ = writeln!(w, " {} {} SHUT /", ctl.well, phase);
                }
            }
        }
        let _ = writeln!(w, "/");
    }
    let _ = writeln!(w, "END");
    out
}

fn array(w: &mut String, keyword: &str, values: &[f64]) {
    let tokens: Vec<String> = values.iter().map(|v| format!("{v:e}")).collect();
    record_runs(w, keyword, &tokens);
}

/// Writes one record, folding runs of equal tokens into `N*value`.
fn record_runs(w: &mut String, keyword: &str, tokens: &[String]) {
    let _ = writeln!(w, "{keyword}");
    let mut line_len = 0;
    let mut i = 0;
    while i < tokens.len() {
        let mut j = i + 1;
        while j < tokens.len() && tokens[j] == tokens[i] {
            j += 1;
        }
        let item = if j - i > 1 {
            format!("{}*{}", j - i, tokens[i])
        } else {
            tokens[i].clone()
        };
        if line_len > 72 {
            w.push('\n');
            line_len = 0;
        }
        w.push(' ');
        w.push_str(&item);
        line_len += item.len() + 1;
        i = j;
    }
    w.push_str(" /\n");
}
