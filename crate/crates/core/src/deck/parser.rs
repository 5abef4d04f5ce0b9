use std::collections::BTreeMap;

use thiserror::Error;

use super::{
    CellSizes, ControlMode, DeckModel, FluidSpec, InitSpec, Method, Phase, PhaseProps, RockSpec,
    SatCurve, SatRow, SatTable, ScheduleEvent, SolverConfig, UnitSystem, Viscosity, WellControl,
    WellKind, WellSpec, BAR, CENTIPOISE, DAY, MILLIDARCY,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DeckError {
    #[error("line {line}: syntax error at `{token}`: {reason}")]
    Syntax {
        line: usize,
        token: String,
        reason: String,
    },
    #[error("line {line}: unknown keyword `{keyword}`")]
    UnknownKeyword { line: usize, keyword: String },
    #[error("line {line}: missing required section {name}")]
    MissingSection { name: String, line: usize },
    #[error("line {line}: {keyword} expects {expected} values, got {got}")]
    Arity {
        keyword: String,
        expected: usize,
        got: usize,
        line: usize,
    },
}

impl DeckError {
    pub fn line(&self) -> usize {
        match *self {
            DeckError::Syntax { line, .. }
            | DeckError::UnknownKeyword { line, .. }
            | DeckError::MissingSection { line, .. }
            | DeckError::Arity { line, .. } => line,
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    text: String,
    line: usize,
}

fn tokenize(text: &str) -> Vec<Token> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = match raw.find("--") {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        for word in body.split_whitespace() {
            // `/` terminates a record even when glued to a value, as in `0.2/`.
            let mut rest = word;
            while let Some(pos) = rest.find('/') {
                if pos > 0 {
                    out.push(Token {
                        text: rest[..pos].to_string(),
                        line,
                    });
                }
                out.push(Token {
                    text: "/".to_string(),
                    line,
                });
                rest = &rest[pos + 1..];
            }
            if !rest.is_empty() {
                out.push(Token {
                    text: rest.to_string(),
                    line,
                });
            }
        }
    }
    out
}

fn syntax(tok: &Token, reason: impl Into<String>) -> DeckError {
    DeckError::Syntax {
        line: tok.line,
        token: tok.text.clone(),
        reason: reason.into(),
    }
}

fn is_keyword(text: &str) -> bool {
    text.starts_with(|c: char| c.is_ascii_alphabetic())
}

/// One `/`-terminated record with repeat counts expanded.
#[derive(Debug, Clone)]
struct Record {
    tokens: Vec<Token>,
    /// Line of the terminating `/`.
    end_line: usize,
}

impl Record {
    fn line(&self) -> usize {
        self.tokens.first().map_or(self.end_line, |t| t.line)
    }

    fn f64_at(&self, idx: usize) -> Result<f64, DeckError> {
        parse_f64(&self.tokens[idx])
    }

    fn expect_len(&self, keyword: &str, expected: usize) -> Result<(), DeckError> {
        if self.tokens.len() != expected {
            return Err(DeckError::Arity {
                keyword: keyword.to_string(),
                expected,
                got: self.tokens.len(),
                line: self.line(),
            });
        }
        Ok(())
    }

    fn numbers(&self) -> Result<Vec<f64>, DeckError> {
        self.tokens.iter().map(parse_f64).collect()
    }
}

fn parse_f64(tok: &Token) -> Result<f64, DeckError> {
    match tok.text.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(syntax(tok, "expected a number")),
    }
}

fn parse_usize(tok: &Token) -> Result<usize, DeckError> {
    tok.text
        .parse::<usize>()
        .map_err(|_| syntax(tok, "expected a non-negative integer"))
}

struct Units {
    system: UnitSystem,
}

impl Units {
    fn pressure(&self, v: f64) -> f64 {
        match self.system {
            UnitSystem::Field => v * BAR,
            UnitSystem::Si => v,
        }
    }
    fn inv_pressure(&self, v: f64) -> f64 {
        match self.system {
            UnitSystem::Field => v / BAR,
            UnitSystem::Si => v,
        }
    }
    fn permeability(&self, v: f64) -> f64 {
        match self.system {
            UnitSystem::Field => v * MILLIDARCY,
            UnitSystem::Si => v,
        }
    }
    fn viscosity(&self, v: f64) -> f64 {
        match self.system {
            UnitSystem::Field => v * CENTIPOISE,
            UnitSystem::Si => v,
        }
    }
    fn surface_rate(&self, v: f64) -> f64 {
        match self.system {
            UnitSystem::Field => v / DAY,
            UnitSystem::Si => v,
        }
    }
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    last_line: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn record(&mut self, keyword: &str) -> Result<Record, DeckError> {
        let mut tokens = Vec::new();
        loop {
            let Some(tok) = self.next() else {
                return Err(DeckError::Syntax {
                    line: self.last_line,
                    token: keyword.to_string(),
                    reason: "record not terminated by `/`".into(),
                });
            };
            if tok.text == "/" {
                return Ok(Record {
                    tokens,
                    end_line: tok.line,
                });
            }
            expand_repeat(tok, &mut tokens)?;
        }
    }

    /// Records up to (and consuming) the empty record that closes the keyword.
    fn section(&mut self, keyword: &str) -> Result<Vec<Record>, DeckError> {
        let mut records = Vec::new();
        loop {
            let rec = self.record(keyword)?;
            if rec.tokens.is_empty() {
                return Ok(records);
            }
            records.push(rec);
        }
    }
}

fn expand_repeat(tok: Token, out: &mut Vec<Token>) -> Result<(), DeckError> {
    if let Some((count, value)) = tok.text.split_once('*') {
        let n: usize = count
            .parse()
            .map_err(|_| syntax(&tok, "malformed repeat count"))?;
        if n == 0 || value.is_empty() {
            return Err(syntax(&tok, "malformed repeat count"));
        }
        for _ in 0..n {
            out.push(Token {
                text: value.to_string(),
                line: tok.line,
            });
        }
    } else {
        out.push(tok);
    }
    Ok(())
}

#[derive(Default)]
struct Pending {
    dimens: Option<(usize, usize, usize)>,
    dx: Option<Vec<f64>>,
    dy: Option<Vec<f64>>,
    dz: Option<Vec<f64>>,
    tops: Option<f64>,
    poro: Option<Vec<f64>>,
    permx: Option<Vec<f64>>,
    permy: Option<Vec<f64>>,
    permz: Option<Vec<f64>>,
    actnum: Option<Vec<u8>>,
    phases: Option<Vec<Phase>>,
    fluid: BTreeMap<Phase, (PhaseProps, usize)>,
    fluid_seen: bool,
    visc: BTreeMap<Phase, (Vec<(f64, f64)>, usize)>,
    curves: Vec<SatCurve>,
    rock: Option<RockSpec>,
    init: Option<InitSpec>,
    wells: Vec<WellSpec>,
    schedule: Option<Vec<ScheduleEvent>>,
    solver: SolverConfig,
}

/// Parses deck text into a [`DeckModel`]. Semantic checks beyond shape and
/// arity live in [`super::validate_deck`].
pub fn parse_deck(text: &str) -> Result<DeckModel, DeckError> {
    let tokens = tokenize(text);
    let last_line = text.lines().count().max(1);
    let mut p = Parser {
        tokens,
        pos: 0,
        last_line,
    };
    let mut units = Units {
        system: UnitSystem::Field,
    };
    let mut d = Pending::default();
    let mut seen: Vec<String> = Vec::new();

    while let Some(tok) = p.next() {
        if !is_keyword(&tok.text) {
            return Err(syntax(&tok, "expected a keyword"));
        }
        let kw = tok.text.clone();
        if kw == "END" {
            break;
        }
        if seen.contains(&kw) && kw != "VISCTAB" {
            return Err(syntax(&tok, "duplicate keyword"));
        }
        seen.push(kw.clone());
        match kw.as_str() {
            "UNITS" => {
                if seen.len() > 1 {
                    return Err(syntax(&tok, "UNITS must be the first keyword"));
                }
                let rec = p.record(&kw)?;
                rec.expect_len(&kw, 1)?;
                units.system = match rec.tokens[0].text.as_str() {
                    "FIELD" => UnitSystem::Field,
                    "SI" => UnitSystem::Si,
                    _ => return Err(syntax(&rec.tokens[0], "expected FIELD or SI")),
                };
            }
            "DIMENS" => {
                let rec = p.record(&kw)?;
                rec.expect_len(&kw, 3)?;
                let n: Vec<usize> = rec.tokens.iter().map(parse_usize).collect::<Result<_, _>>()?;
                if n.contains(&0) {
                    return Err(syntax(&rec.tokens[0], "dimensions must be positive"));
                }
                d.dimens = Some((n[0], n[1], n[2]));
            }
            "DX" | "DY" | "DZ" => {
                let (nx, ny, nz) = need_dimens(&d, &tok)?;
                let expected = match kw.as_str() {
                    "DX" => nx,
                    "DY" => ny,
                    _ => nz,
                };
                let rec = p.record(&kw)?;
                rec.expect_len(&kw, expected)?;
                let vals = rec.numbers()?;
                match kw.as_str() {
                    "DX" => d.dx = Some(vals),
                    "DY" => d.dy = Some(vals),
                    _ => d.dz = Some(vals),
                }
            }
            "TOPS" => {
                let rec = p.record(&kw)?;
                rec.expect_len(&kw, 1)?;
                d.tops = Some(rec.f64_at(0)?);
            }
            "PORO" | "PERMX" | "PERMY" | "PERMZ" => {
                let (nx, ny, nz) = need_dimens(&d, &tok)?;
                let rec = p.record(&kw)?;
                rec.expect_len(&kw, nx * ny * nz)?;
                let vals = rec.numbers()?;
                match kw.as_str() {
                    "PORO" => d.poro = Some(vals),
                    "PERMX" => d.permx = Some(vals.into_iter().map(|v| units.permeability(v)).collect()),
                    "PERMY" => d.permy = Some(vals.into_iter().map(|v| units.permeability(v)).collect()),
                    _ => d.permz = Some(vals.into_iter().map(|v| units.permeability(v)).collect()),
                }
            }
            "ACTNUM" => {
                let (nx, ny, nz) = need_dimens(&d, &tok)?;
                let rec = p.record(&kw)?;
                rec.expect_len(&kw, nx * ny * nz)?;
                let vals = rec
                    .tokens
                    .iter()
                    .map(|t| t.text.parse::<u8>().map_err(|_| syntax(t, "expected 0 or 1")))
                    .collect::<Result<Vec<_>, _>>()?;
                d.actnum = Some(vals);
            }
            "PHASES" => {
                let rec = p.record(&kw)?;
                let mut phases = Vec::new();
                for t in &rec.tokens {
                    let ph = Phase::from_keyword(&t.text)
                        .ok_or_else(|| syntax(t, "expected WATER, OIL or GAS"))?;
                    if phases.contains(&ph) {
                        return Err(syntax(t, "phase listed twice"));
                    }
                    phases.push(ph);
                }
                if phases.is_empty() {
                    return Err(DeckError::Arity {
                        keyword: kw,
                        expected: 1,
                        got: 0,
                        line: rec.end_line,
                    });
                }
                phases.sort();
                d.phases = Some(phases);
            }
            "FLUID" => {
                d.fluid_seen = true;
                for rec in p.section(&kw)? {
                    rec.expect_len(&kw, 6)?;
                    let phase = phase_token(&rec.tokens[0])?;
                    if d.fluid.contains_key(&phase) {
                        return Err(syntax(&rec.tokens[0], "phase given twice"));
                    }
                    let props = PhaseProps {
                        phase,
                        p_ref: units.pressure(rec.f64_at(1)?),
                        xi_ref: rec.f64_at(2)?,
                        rho_ref: rec.f64_at(3)?,
                        compressibility: units.inv_pressure(rec.f64_at(4)?),
                        viscosity: Viscosity::Constant(units.viscosity(rec.f64_at(5)?)),
                    };
                    d.fluid.insert(phase, (props, rec.line()));
                }
            }
            "VISCTAB" => {
                for rec in p.section(&kw)? {
                    let phase = phase_token(&rec.tokens[0])?;
                    let n = rec.tokens.len() - 1;
                    if n == 0 || n % 2 != 0 {
                        return Err(DeckError::Arity {
                            keyword: kw.clone(),
                            expected: n + 1 + n % 2,
                            got: n,
                            line: rec.line(),
                        });
                    }
                    let mut rows = Vec::with_capacity(n / 2);
                    for pair in 0..n / 2 {
                        let pr = units.pressure(rec.f64_at(1 + 2 * pair)?);
                        let mu = units.viscosity(rec.f64_at(2 + 2 * pair)?);
                        rows.push((pr, mu));
                    }
                    d.visc.insert(phase, (rows, rec.line()));
                }
            }
            "SWOF" | "SGOF" | "SGWF" => {
                let (displacing, displaced) = match kw.as_str() {
                    "SWOF" => (Phase::Water, Phase::Oil),
                    "SGOF" => (Phase::Gas, Phase::Oil),
                    _ => (Phase::Gas, Phase::Water),
                };
                let mut rows = Vec::new();
                for rec in p.section(&kw)? {
                    rec.expect_len(&kw, 4)?;
                    rows.push(SatRow {
                        s: rec.f64_at(0)?,
                        kr_displacing: rec.f64_at(1)?,
                        kr_displaced: rec.f64_at(2)?,
                        pc: units.pressure(rec.f64_at(3)?),
                    });
                }
                if rows.is_empty() {
                    return Err(DeckError::Arity {
                        keyword: kw,
                        expected: 4,
                        got: 0,
                        line: tok.line,
                    });
                }
                d.curves.push(SatCurve {
                    displacing,
                    displaced,
                    rows,
                });
            }
            "ROCK" => {
                let rec = p.record(&kw)?;
                rec.expect_len(&kw, 2)?;
                d.rock = Some(RockSpec {
                    p_ref: units.pressure(rec.f64_at(0)?),
                    compressibility: units.inv_pressure(rec.f64_at(1)?),
                });
            }
            "INIT" => d.init = Some(parse_init(&mut p, &units, &tok)?),
            "WELSPECS" => {
                for rec in p.section(&kw)? {
                    rec.expect_len(&kw, 3)?;
                    let name = rec.tokens[0].text.clone();
                    if d.wells.iter().any(|w| w.name == name) {
                        return Err(syntax(&rec.tokens[0], "well defined twice"));
                    }
                    let kind = match rec.tokens[1].text.as_str() {
                        "INJ" => WellKind::Injector,
                        "PROD" => WellKind::Producer,
                        _ => return Err(syntax(&rec.tokens[1], "expected INJ or PROD")),
                    };
                    d.wells.push(WellSpec {
                        name,
                        kind,
                        perforations: Vec::new(),
                        radius: rec.f64_at(2)?,
                    });
                }
            }
            "COMPDAT" => {
                for rec in p.section(&kw)? {
                    rec.expect_len(&kw, 5)?;
                    let well = d
                        .wells
                        .iter_mut()
                        .find(|w| w.name == rec.tokens[0].text)
                        .ok_or_else(|| syntax(&rec.tokens[0], "well not declared in WELSPECS"))?;
                    let idx: Vec<usize> = rec.tokens[1..]
                        .iter()
                        .map(|t| {
                            parse_usize(t).and_then(|v| {
                                if v == 0 {
                                    Err(syntax(t, "cell indices are 1-based"))
                                } else {
                                    Ok(v - 1)
                                }
                            })
                        })
                        .collect::<Result<_, _>>()?;
                    if idx[3] < idx[2] {
                        return Err(syntax(&rec.tokens[4], "bottom layer above top layer"));
                    }
                    for k in idx[2]..=idx[3] {
                        well.perforations.push((idx[0], idx[1], k));
                    }
                }
            }
            "SOLVER" => parse_solver(&mut p, &units, &mut d.solver)?,
            "SCHEDULE" => {
                d.schedule = Some(parse_schedule(&mut p, &units)?);
                // SCHEDULE runs to END or end of input.
                break;
            }
            _ => {
                return Err(DeckError::UnknownKeyword {
                    line: tok.line,
                    keyword: kw,
                })
            }
        }
    }

    finish(d, p.last_line)
}

fn need_dimens(d: &Pending, tok: &Token) -> Result<(usize, usize, usize), DeckError> {
    d.dimens.ok_or(DeckError::MissingSection {
        name: "DIMENS".into(),
        line: tok.line,
    })
}

fn phase_token(tok: &Token) -> Result<Phase, DeckError> {
    Phase::from_keyword(&tok.text).ok_or_else(|| syntax(tok, "expected WATER, OIL or GAS"))
}

fn parse_init(p: &mut Parser, units: &Units, kw: &Token) -> Result<InitSpec, DeckError> {
    let mut depth = None;
    let mut pressure = None;
    let mut spec = InitSpec {
        ref_depth: 0.0,
        ref_pressure: 0.0,
        woc: None,
        goc: None,
        swi: 0.0,
    };
    for rec in p.section("INIT")? {
        rec.expect_len("INIT", 2)?;
        let v = rec.f64_at(1)?;
        match rec.tokens[0].text.as_str() {
            "DEPTH" => depth = Some(v),
            "PRESSURE" => pressure = Some(units.pressure(v)),
            "WOC" => spec.woc = Some(v),
            "GOC" => spec.goc = Some(v),
            "SWI" => spec.swi = v,
            _ => return Err(syntax(&rec.tokens[0], "unknown INIT item")),
        }
    }
    spec.ref_depth = depth.ok_or(DeckError::MissingSection {
        name: "INIT DEPTH".into(),
        line: kw.line,
    })?;
    spec.ref_pressure = pressure.ok_or(DeckError::MissingSection {
        name: "INIT PRESSURE".into(),
        line: kw.line,
    })?;
    Ok(spec)
}

fn parse_solver(p: &mut Parser, units: &Units, cfg: &mut SolverConfig) -> Result<(), DeckError> {
    for rec in p.section("SOLVER")? {
        let key = rec.tokens[0].text.clone();
        let arity = match key.as_str() {
            "DT" => 4,
            "P_WINDOW" => 3,
            _ => 2,
        };
        rec.expect_len(&key, arity)?;
        let int = |idx: usize| parse_usize(&rec.tokens[idx]);
        match key.as_str() {
            "METHOD" => {
                cfg.method = Method::from_keyword(&rec.tokens[1].text)
                    .ok_or_else(|| syntax(&rec.tokens[1], "unknown method"))?
            }
            "TOL_NR" => cfg.tol_nr_global = rec.f64_at(1)?,
            "TOL_LS" => cfg.tol_ls_global = rec.f64_at(1)?,
            "TOL_NR_LOCAL" => cfg.tol_nr_local = rec.f64_at(1)?,
            "TOL_LS_LOCAL" => cfg.tol_ls_local = rec.f64_at(1)?,
            "DT" => {
                cfg.dt_init = rec.f64_at(1)?;
                cfg.dt_max = rec.f64_at(2)?;
                cfg.dt_min = rec.f64_at(3)?;
            }
            "MAX_NR" => cfg.max_nr_iters = int(1)?,
            "MAX_NR_LOCAL" => cfg.max_nr_local = int(1)?,
            "MARK" => cfg.ddm_mark_threshold = rec.f64_at(1)?,
            "WORKERS" => cfg.n_workers = int(1)?,
            "LS_MAX" => cfg.ls_max_iters = int(1)?,
            "LS_RESTART" => cfg.ls_restart = int(1)?,
            "DP_TARGET" => cfg.dp_target = units.pressure(rec.f64_at(1)?),
            "DS_TARGET" => cfg.ds_target = rec.f64_at(1)?,
            "DT_GROWTH" => cfg.dt_growth = rec.f64_at(1)?,
            "CUT" => cfg.cut_factor = rec.f64_at(1)?,
            "SAT_CHOP" => cfg.sat_chop = rec.f64_at(1)?,
            "CFL" => cfg.cfl_limit = rec.f64_at(1)?,
            "P_WINDOW" => {
                cfg.p_min = units.pressure(rec.f64_at(1)?);
                cfg.p_max = units.pressure(rec.f64_at(2)?);
            }
            "NEG_MOLES" => cfg.neg_moles_rel = rec.f64_at(1)?,
            _ => return Err(syntax(&rec.tokens[0], "unknown SOLVER item")),
        }
    }
    Ok(())
}

fn parse_schedule(p: &mut Parser, units: &Units) -> Result<Vec<ScheduleEvent>, DeckError> {
    let mut events: Vec<ScheduleEvent> = Vec::new();
    while let Some(tok) = p.peek().cloned() {
        if tok.text == "END" {
            p.next();
            break;
        }
        p.next();
        match tok.text.as_str() {
            "TIME" => {
                let rec = p.record("TIME")?;
                rec.expect_len("TIME", 1)?;
                events.push(ScheduleEvent {
                    time: rec.f64_at(0)?,
                    controls: Vec::new(),
                });
            }
            "WCONTROL" => {
                let Some(event) = events.last_mut() else {
                    return Err(syntax(&tok, "WCONTROL before the first TIME"));
                };
                for rec in p.section("WCONTROL")? {
                    if rec.tokens.len() < 3 {
                        return Err(DeckError::Arity {
                            keyword: "WCONTROL".into(),
                            expected: 4,
                            got: rec.tokens.len(),
                            line: rec.line(),
                        });
                    }
                    let phase = match rec.tokens[1].text.as_str() {
                        "ALL" => None,
                        _ => Some(phase_token(&rec.tokens[1])?),
                    };
                    let mode = match rec.tokens[2].text.as_str() {
                        "SHUT" => {
                            rec.expect_len("WCONTROL", 3)?;
                            ControlMode::Shut
                        }
                        "BHP" => {
                            rec.expect_len("WCONTROL", 4)?;
                            ControlMode::Bhp(units.pressure(rec.f64_at(3)?))
                        }
                        "RATE" => {
                            rec.expect_len("WCONTROL", 4)?;
                            ControlMode::Rate(units.surface_rate(rec.f64_at(3)?))
                        }
                        _ => return Err(syntax(&rec.tokens[2], "expected BHP, RATE or SHUT")),
                    };
                    event.controls.push(WellControl {
                        well: rec.tokens[0].text.clone(),
                        phase,
                        mode,
                    });
                }
            }
            _ if is_keyword(&tok.text) => {
                return Err(DeckError::UnknownKeyword {
                    line: tok.line,
                    keyword: tok.text,
                })
            }
            _ => return Err(syntax(&tok, "expected TIME, WCONTROL or END")),
        }
    }
    Ok(events)
}

fn finish(d: Pending, last_line: usize) -> Result<DeckModel, DeckError> {
    let missing = |name: &str| DeckError::MissingSection {
        name: name.to_string(),
        line: last_line,
    };
    let dimens = d.dimens.ok_or_else(|| missing("DIMENS"))?;
    let dx = d.dx.ok_or_else(|| missing("DX"))?;
    let dy = d.dy.ok_or_else(|| missing("DY"))?;
    let dz = d.dz.ok_or_else(|| missing("DZ"))?;
    let depth_top = d.tops.ok_or_else(|| missing("TOPS"))?;
    let poro = d.poro.ok_or_else(|| missing("PORO"))?;
    let permx = d.permx.ok_or_else(|| missing("PERMX"))?;
    let permy = d.permy.unwrap_or_else(|| permx.clone());
    let permz = d.permz.unwrap_or_else(|| permx.clone());
    let n = dimens.0 * dimens.1 * dimens.2;
    let actnum = d.actnum.unwrap_or_else(|| vec![1; n]);
    let phases = d.phases.ok_or_else(|| missing("PHASES"))?;
    if !d.fluid_seen {
        return Err(missing("FLUID"));
    }
    let mut fluid = d.fluid;
    let mut props = Vec::with_capacity(phases.len());
    for &ph in &phases {
        let (mut pp, _) = fluid
            .remove(&ph)
            .ok_or_else(|| missing(&format!("FLUID {ph}")))?;
        if let Some((rows, _)) = d.visc.get(&ph) {
            pp.viscosity = Viscosity::Table(rows.clone());
        }
        props.push(pp);
    }
    if let Some((ph, (_, line))) = fluid.into_iter().next() {
        return Err(DeckError::Syntax {
            line,
            token: ph.keyword().into(),
            reason: "FLUID record for a phase missing from PHASES".into(),
        });
    }
    if let Some((ph, (_, line))) = d.visc.iter().find(|(ph, _)| !phases.contains(ph)) {
        return Err(DeckError::Syntax {
            line: *line,
            token: ph.keyword().into(),
            reason: "VISCTAB record for a phase missing from PHASES".into(),
        });
    }
    let rock = d.rock.ok_or_else(|| missing("ROCK"))?;
    let init = d.init.ok_or_else(|| missing("INIT"))?;
    let schedule = d.schedule.ok_or_else(|| missing("SCHEDULE"))?;
    let component_names = phases.iter().map(|p| p.keyword().to_string()).collect();

    Ok(DeckModel {
        dimens,
        cell_sizes: CellSizes { dx, dy, dz },
        depth_top,
        poro,
        permx,
        permy,
        permz,
        actnum,
        fluid: FluidSpec {
            phases,
            props,
            component_names,
        },
        sat_table: SatTable { curves: d.curves },
        rock,
        init,
        wells: d.wells,
        schedule,
        solver_cfg: d.solver,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    use crate::testing::TWO_CELL_DECK as TWO_CELL;

    #[test]
    fn empty_input_misses_dimens() {
        let err = parse_deck("").unwrap_err();
        assert!(matches!(err, DeckError::MissingSection { ref name, .. } if name == "DIMENS"));
    }

    #[test]
    fn two_cell_deck_fields() {
        let m = parse_deck(TWO_CELL).unwrap();
        assert_eq!(m.dimens, (2, 1, 1));
        assert_eq!(m.cell_sizes.dx, vec![10.0, 10.0]);
        assert_eq!(m.cell_sizes.dy, vec![10.0]);
        assert_eq!(m.depth_top, 1000.0);
        assert_eq!(m.poro, vec![0.2, 0.2]);
        assert_eq!(m.permx, vec![100.0 * MILLIDARCY; 2]);
        assert_eq!(m.permz, m.permx);
        assert_eq!(m.actnum, vec![1, 1]);
        assert_eq!(m.fluid.phases, vec![Phase::Water]);
        assert_eq!(m.fluid.props[0].p_ref, 200.0 * BAR);
        assert_eq!(m.fluid.props[0].compressibility, 4.5e-5 / BAR);
        assert_eq!(m.fluid.props[0].viscosity, Viscosity::Constant(0.5 * CENTIPOISE));
        assert_eq!(m.rock.compressibility, 1e-5 / BAR);
        assert_eq!(m.init.ref_depth, 1005.0);
        assert_eq!(m.schedule.len(), 2);
        assert_eq!(m.schedule[1].time, 10.0);
    }

    #[test]
    fn short_porosity_is_arity_error() {
        let text = TWO_CELL.replace(" 2*0.2 /", " 0.2 /");
        let err = parse_deck(&text).unwrap_err();
        assert_eq!(
            err,
            DeckError::Arity {
                keyword: "PORO".into(),
                expected: 2,
                got: 1,
                line: 13
            }
        );
    }

    #[test]
    fn unknown_keyword_reports_line() {
        let text = TWO_CELL.replace("TOPS", "TOPZ");
        let err = parse_deck(&text).unwrap_err();
        assert_eq!(
            err,
            DeckError::UnknownKeyword {
                line: 10,
                keyword: "TOPZ".into()
            }
        );
    }

    #[test]
    fn bad_number_is_syntax_error() {
        let text = TWO_CELL.replace(" 1000 /", " 1o00 /");
        match parse_deck(&text).unwrap_err() {
            DeckError::Syntax { line, token, .. } => {
                assert_eq!(line, 11);
                assert_eq!(token, "1o00");
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn glued_terminator_and_repeat() {
        let text = TWO_CELL.replace(" 2*0.2 /", " 2*0.2/");
        let m = parse_deck(&text).unwrap();
        assert_eq!(m.poro, vec![0.2, 0.2]);
    }

    #[test]
    fn unterminated_record() {
        let err = parse_deck("DIMENS\n 1 1 1\n").unwrap_err();
        assert!(matches!(err, DeckError::Syntax { line: 2, .. }));
    }

    #[test]
    fn parsing_is_pure() {
        assert_eq!(parse_deck(TWO_CELL).unwrap(), parse_deck(TWO_CELL).unwrap());
    }
}
