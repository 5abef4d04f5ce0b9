//! Command-line front end: `run`, `validate` and `report`.

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::deck::{parse_deck, validate_deck, DeckModel, Method};
use crate::domain::Domain;
use crate::output::{self, OutputError, RunMeta, RunStatsRecord};
use crate::solver::{RunOptions, Simulation, SolverError};

#[derive(Debug, Parser)]
#[command(name = "strata", version, about = "Black-oil reservoir simulator with domain-decomposed Newton solvers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a deck and write the run directory.
    Run(RunArgs),
    /// Parse and validate a deck without running it.
    Validate { deck: PathBuf },
    /// Gather snapshots of a finished run and print its statistics.
    Report { run_dir: PathBuf },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    pub deck: PathBuf,
    /// Worker count (overrides SOLVER WORKERS).
    #[arg(long)]
    pub workers: Option<usize>,
    /// FIM, IMPEC, CDDM_FIM or ADDM_FIM (overrides SOLVER METHOD).
    #[arg(long, value_parser = parse_method)]
    pub method: Option<Method>,
    /// Run directory; defaults to `<deck stem>.out` in the current directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write partition, exchange maps and per-step coupling groups to
    /// `domain.json`.
    #[arg(long)]
    pub dump_domain: bool,
    /// Print one line per accepted step.
    #[arg(short, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

fn parse_method(s: &str) -> Result<Method, String> {
    Method::from_keyword(s).ok_or_else(|| format!("unknown method `{s}` (FIM, IMPEC, CDDM_FIM, ADDM_FIM)"))
}

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    Validation = 1,
    Io = 2,
    Solver = 3,
}

/// A failure with its exit code and one-line diagnostic.
#[derive(Debug)]
pub struct CliError {
    pub exit: Exit,
    pub message: String,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl CliError {
    fn new(exit: Exit, message: impl Into<String>) -> CliError {
        CliError {
            exit,
            message: message.into(),
        }
    }
}

impl From<OutputError> for CliError {
    fn from(e: OutputError) -> CliError {
        CliError::new(Exit::Io, e.to_string())
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> CliError {
        let exit = match e {
            SolverError::Grid(_) | SolverError::Config(_) => Exit::Validation,
            _ => Exit::Solver,
        };
        CliError::new(exit, e.to_string())
    }
}

fn io_error(path: &Path, e: io::Error) -> CliError {
    let msg = if e.kind() == io::ErrorKind::NotFound {
        format!("{}: no such file", path.display())
    } else {
        format!("{}: {e}", path.display())
    };
    CliError::new(Exit::Io, msg)
}

/// Reads and parses a deck; syntax errors carry their line number.
pub fn load_deck(path: &Path) -> Result<DeckModel, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    parse_deck(&text).map_err(|e| CliError::new(Exit::Validation, format!("{}: {e}", path.display())))
}

/// Parses arguments and runs the command. Diagnostics go to `err` as a
/// single line; the return value is the process exit code.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return 0;
            }
            let first = e.to_string().lines().next().unwrap_or("invalid arguments").to_string();
            let _ = writeln!(err, "{first}");
            return Exit::Validation as i32;
        }
    };
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a, out),
        Command::Validate { deck } => cmd_validate(deck, out),
        Command::Report { run_dir } => cmd_report(run_dir, out),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit as i32
        }
    }
}

pub fn cmd_validate(deck: &Path, out: &mut dyn Write) -> Result<(), CliError> {
    let model = load_deck(deck)?;
    let report = validate_deck(&model);
    if report.is_clean() {
        let _ = writeln!(out, "{}: ok", deck.display());
        return Ok(());
    }
    for v in &report.violations {
        let _ = writeln!(out, "{v}");
    }
    Err(CliError::new(
        Exit::Validation,
        format!("{}: {} violation(s)", deck.display(), report.violations.len()),
    ))
}

#[derive(Serialize)]
struct DomainDump<'a> {
    owner: &'a [usize],
    domains: &'a [Domain],
    steps: Vec<StepGroups>,
}

#[derive(Serialize)]
struct StepGroups {
    step: usize,
    time: f64,
    groups: Vec<Vec<usize>>,
    coupled_fraction: f64,
}

fn clear_run_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    for entry in fs::read_dir(dir).map_err(|e| io_error(dir, e))? {
        let entry = entry.map_err(|e| io_error(dir, e))?;
        let name = entry.file_name();
        let name = name.to_string_lossy();
        let stale = name == output::SUMMARY_FILE
            || name == output::META_FILE
            || name == "domain.json"
            || (name.starts_with("snap_t") && name.ends_with(".csv"));
        if stale {
            let p = entry.path();
            fs::remove_file(&p).map_err(|e| io_error(&p, e))?;
        }
    }
    Ok(())
}

fn write_snapshots(sim: &Simulation, dir: &Path) -> Result<(), OutputError> {
    for rank in 0..sim.n_workers() {
        output::write_snapshot(dir, rank, &sim.cell_rows(rank), &sim.props.pvt.phases, sim.time)?;
    }
    Ok(())
}

pub fn cmd_run(args: &RunArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut model = load_deck(&args.deck)?;
    if let Some(w) = args.workers {
        model.solver_cfg.n_workers = w;
    }
    if let Some(m) = args.method {
        model.solver_cfg.method = m;
    }
    let report = validate_deck(&model);
    if !report.is_clean() {
        let all: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
        return Err(CliError::new(Exit::Validation, all.join("; ")));
    }
    let dir = match &args.out {
        Some(d) => d.clone(),
        None => {
            let stem = args.deck.file_stem().map_or("run".into(), |s| s.to_string_lossy().into_owned());
            PathBuf::from(format!("{stem}.out"))
        }
    };
    clear_run_dir(&dir)?;

    let started = Instant::now();
    let mut sim = Simulation::new(model, &RunOptions::default())?;
    let mut meta = RunMeta {
        version: env!("CARGO_PKG_VERSION").to_string(),
        deck: args.deck.display().to_string(),
        method: sim.cfg.method,
        n_workers: sim.n_workers(),
        config: sim.cfg.clone(),
        partition_hash: output::partition_hash(&sim.owner),
        phases: sim.props.pvt.phases.clone(),
        initial_moles: sim.component_totals(),
        stats: RunStatsRecord::default(),
        wall_time_s: 0.0,
        completed: false,
    };
    output::write_meta(&dir, &meta)?;
    write_snapshots(&sim, &dir)?;

    let mut groups = Vec::new();
    let outcome = loop {
        match sim.step() {
            Ok(Some(rep)) => {
                output::write_summary_row(&dir, &output::summary_row(&sim, &rep))?;
                if sim.at_report_time() {
                    write_snapshots(&sim, &dir)?;
                }
                if args.verbose > 0 {
                    let _ = writeln!(
                        out,
                        "step {:>5}  t {:>10.4} d  dt {:>9.4} d  NR {:>3}  LS {:>4}  cuts {}",
                        rep.step,
                        sim.time,
                        rep.dt,
                        rep.nr_global,
                        rep.ls_global,
                        rep.cuts
                    );
                }
                if args.dump_domain {
                    groups.push(StepGroups {
                        step: rep.step,
                        time: rep.time,
                        groups: rep.groups.clone(),
                        coupled_fraction: rep.coupled_fraction,
                    });
                }
            }
            Ok(None) => break Ok(()),
            Err(e) => break Err(e),
        }
    };
    let wall = started.elapsed().as_secs_f64();
    meta.stats = RunStatsRecord::from(&sim.stats);
    meta.wall_time_s = wall;
    meta.completed = outcome.is_ok();
    output::write_meta(&dir, &meta)?;
    if args.dump_domain {
        let dump = DomainDump {
            owner: &sim.owner,
            domains: &sim.domains,
            steps: groups,
        };
        let path = dir.join("domain.json");
        let text = serde_json::to_string_pretty(&dump).expect("domain dump serializes");
        fs::write(&path, text).map_err(|e| io_error(&path, e))?;
    }
    outcome?;
    output::gather_outputs(&dir)?;
    let name = output::method_name(meta.method);
    let _ = write!(out, "{}", output::stats_table(&[(name, &meta.stats, wall)]));
    let _ = writeln!(out, "run directory: {}", dir.display());
    Ok(())
}

pub fn cmd_report(run_dir: &Path, out: &mut dyn Write) -> Result<(), CliError> {
    if !run_dir.is_dir() {
        return Err(io_error(run_dir, io::Error::from(io::ErrorKind::NotFound)));
    }
    let meta = output::read_meta(run_dir)?;
    let (_, rows) = output::read_summary(run_dir)?;
    let merged = output::gather_outputs(run_dir)?;
    let name = output::method_name(meta.method);
    let _ = write!(out, "{}", output::stats_table(&[(name, &meta.stats, meta.wall_time_s)]));
    let _ = writeln!(
        out,
        "{} summary rows, {} merged snapshots, {} workers{}",
        rows.len(),
        merged.len(),
        meta.n_workers,
        if meta.completed { "" } else { ", run incomplete" }
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> (i32, String, String) {
        let mut o = Vec::new();
        let mut e = Vec::new();
        let code = main_with_args(std::iter::once("strata").chain(args.iter().copied()), &mut o, &mut e);
        (code, String::from_utf8(o).unwrap(), String::from_utf8(e).unwrap())
    }

    #[test]
    fn missing_deck_is_io() {
        let (code, _, err) = run(&["run", "/nonexistent/deck.data"]);
        assert_eq!(code, 2);
        assert!(err.contains("no such file"));
        assert_eq!(err.lines().count(), 1);
    }

    #[test]
    fn unknown_method_rejected() {
        let (code, _, err) = run(&["run", "x.data", "--method", "SFI"]);
        assert_eq!(code, 1);
        assert_eq!(err.lines().count(), 1);
    }

    #[test]
    fn method_aliases() {
        assert_eq!(parse_method("addm_fim"), Ok(Method::AddmFim));
        assert_eq!(parse_method("CDDM-FIM"), Ok(Method::CddmFim));
    }
}
