//! Run directory contents: the rank-0 summary series, per-rank field
//! snapshots, the merged snapshots and the run metadata.
//!
//! Floats are written in shortest round-trip form, so a value read back
//! from any file is bit-identical to the one written.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::deck::{Method, Phase, SolverConfig};
use crate::solver::{CellRow, MethodId, RunStats, Simulation, StepReport};

pub const SUMMARY_FILE: &str = "summary.csv";
pub const META_FILE: &str = "run_meta.json";
const SECONDS_PER_DAY: f64 = 86_400.0;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("snapshot at t = {time} days is missing the shard of rank {rank}")]
    MissingShard { rank: usize, time: String },
    #[error("{path}: {msg}")]
    Malformed { path: PathBuf, msg: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> OutputError + '_ {
    move |source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// One line of `summary.csv`, as ordered `(column, value)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub columns: Vec<(String, String)>,
}

impl SummaryRow {
    pub fn header(&self) -> String {
        self.columns.iter().map(|(k, _)| k.as_str()).collect::<Vec<_>>().join(",")
    }

    pub fn line(&self) -> String {
        self.columns.iter().map(|(_, v)| v.as_str()).collect::<Vec<_>>().join(",")
    }

    pub fn get(&self, column: &str) -> Option<&str> {
        self.columns.iter().find(|(k, _)| k == column).map(|(_, v)| v.as_str())
    }
}

fn f(v: f64) -> String {
    format!("{v:e}")
}

fn method_label(methods: &[MethodId]) -> String {
    methods
        .iter()
        .map(|m| match m {
            MethodId::Fim => "FIM",
            MethodId::Impec => "IMPEC",
            MethodId::FimDdm => "FIMddm",
        })
        .collect::<Vec<_>>()
        .join("+")
}

/// Builds the summary row of the step just accepted by `sim`.
///
/// Field and well rates are surface volumes per day (positive for
/// injection); `CUMNET_*` is the cumulative net well inflow and `NTOT_*`
/// the moles in place, both per component.
pub fn summary_row(sim: &Simulation, rep: &StepReport) -> SummaryRow {
    let pvt = &sim.props.pvt;
    let np = pvt.phases.len();
    let letters: Vec<char> = pvt.phases.iter().map(|p| p.letter()).collect();
    let surf = |i: usize, q: f64| q * SECONDS_PER_DAY / pvt.xi_ref[i];
    let wells = sim.well_reports();
    let mut c: Vec<(String, String)> = Vec::new();
    let mut push = |k: String, v: String| c.push((k, v));
    push("TIME".into(), f(sim.time));
    push("DT".into(), f(rep.dt));
    push("FPR".into(), f(sim.field_pressure()));
    for i in 0..np {
        let (mut prod, mut inj) = (0.0, 0.0);
        for w in &wells {
            let q = surf(i, w.q[i]);
            if q > 0.0 {
                inj += q;
            } else {
                prod -= q;
            }
        }
        push(format!("F{}PR", letters[i]), f(prod));
        push(format!("F{}IR", letters[i]), f(inj));
    }
    let totals = sim.component_totals();
    for i in 0..np {
        push(format!("CUMNET_{}", letters[i]), f(sim.cum_well[i]));
        push(format!("NTOT_{}", letters[i]), f(totals[i]));
    }
    for w in &wells {
        push(format!("WBHP:{}", w.name), f(w.bhp));
        for i in 0..np {
            push(format!("W{}R:{}", letters[i], w.name), f(surf(i, w.q[i])));
        }
    }
    push("METHOD".into(), method_label(&rep.methods));
    push("NR".into(), rep.nr_global.to_string());
    push("LS".into(), rep.ls_global.to_string());
    push("NR_LOCAL".into(), rep.nr_local.to_string());
    push("LS_LOCAL".into(), rep.ls_local.to_string());
    push("WASTED_NR".into(), rep.wasted_nr.to_string());
    push("WASTED_LS".into(), rep.wasted_ls.to_string());
    push("CUTS".into(), rep.cuts.to_string());
    push("GROUPS".into(), rep.groups.len().to_string());
    push("COUPLED".into(), f(rep.coupled_fraction));
    push("FALLBACK".into(), u8::from(rep.ddm_fallback).to_string());
    push("CFL".into(), rep.cfl.map_or_else(String::new, f));
    SummaryRow { columns: c }
}

/// Appends one row to `<run_dir>/summary.csv`, writing the header if the
/// file is new, and flushes.
pub fn write_summary_row(run_dir: &Path, row: &SummaryRow) -> Result<(), OutputError> {
    let path = run_dir.join(SUMMARY_FILE);
    let fresh = fs::metadata(&path).map(|m| m.len() == 0).unwrap_or(true);
    let mut file = OpenOptions::new().create(true).append(true).open(&path).map_err(io_err(&path))?;
    let mut text = String::new();
    if fresh {
        text.push_str(&row.header());
        text.push('\n');
    }
    text.push_str(&row.line());
    text.push('\n');
    file.write_all(text.as_bytes()).map_err(io_err(&path))?;
    file.flush().map_err(io_err(&path))
}

/// Reads `summary.csv` back as a header and rows of raw fields.
pub fn read_summary(run_dir: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), OutputError> {
    let path = run_dir.join(SUMMARY_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| OutputError::Malformed {
            path: path.clone(),
            msg: "empty summary".into(),
        })?
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    Ok((header, rows))
}

/// Time label used in snapshot file names.
pub fn time_label(time: f64) -> String {
    format!("{time:.4}")
}

pub fn snapshot_path(run_dir: &Path, time: f64, rank: usize) -> PathBuf {
    run_dir.join(format!("snap_t{}_r{rank}.csv", time_label(time)))
}

fn snapshot_header(phases: &[Phase]) -> String {
    let mut h = String::from("global_index,P");
    for p in phases {
        h.push_str(&format!(",S_{}", p.letter()));
    }
    for p in phases {
        h.push_str(&format!(",N_{}", p.letter()));
    }
    h
}

/// Writes the interior cells of one rank.
pub fn write_snapshot(run_dir: &Path, rank: usize, rows: &[CellRow], phases: &[Phase], time: f64) -> Result<PathBuf, OutputError> {
    let path = snapshot_path(run_dir, time, rank);
    let mut text = snapshot_header(phases);
    text.push('\n');
    for r in rows {
        text.push_str(&format!("{},{}", r.global_index, f(r.p)));
        for v in r.s.iter().chain(&r.n) {
            text.push(',');
            text.push_str(&f(*v));
        }
        text.push('\n');
    }
    fs::write(&path, text).map_err(io_err(&path))?;
    Ok(path)
}

/// Splits `snap_t<time>_r<rank>.csv` into its time label and rank.
fn parse_shard_name(name: &str) -> Option<(String, usize)> {
    let rest = name.strip_prefix("snap_t")?.strip_suffix(".csv")?;
    let (time, rank) = rest.rsplit_once("_r")?;
    Some((time.to_string(), rank.parse().ok()?))
}

/// Merges the per-rank shards of every snapshot time into
/// `snap_t<time>_merged.csv`, sorted by global index. Shards are kept.
/// Running it again rewrites identical files.
pub fn gather_outputs(run_dir: &Path) -> Result<Vec<PathBuf>, OutputError> {
    let n_ranks = read_meta(run_dir).ok().map(|m| m.n_workers);
    let mut shards: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
    for entry in fs::read_dir(run_dir).map_err(io_err(run_dir))? {
        let entry = entry.map_err(io_err(run_dir))?;
        if let Some((t, r)) = entry.file_name().to_str().and_then(parse_shard_name) {
            shards.entry(t).or_default().insert(r);
        }
    }
    let mut out = Vec::new();
    for (time, ranks) in &shards {
        let expected = n_ranks.unwrap_or_else(|| ranks.iter().max().map_or(0, |m| m + 1));
        if let Some(missing) = (0..expected).find(|r| !ranks.contains(r)) {
            return Err(OutputError::MissingShard {
                rank: missing,
                time: time.clone(),
            });
        }
        let mut header: Option<String> = None;
        let mut rows: Vec<(usize, String)> = Vec::new();
        for r in 0..expected {
            let path = run_dir.join(format!("snap_t{time}_r{r}.csv"));
            let file = File::open(&path).map_err(io_err(&path))?;
            let mut lines = BufReader::new(file).lines();
            let h = lines
                .next()
                .transpose()
                .map_err(io_err(&path))?
                .ok_or_else(|| OutputError::Malformed {
                    path: path.clone(),
                    msg: "missing header".into(),
                })?;
            match &header {
                None => header = Some(h),
                Some(prev) if *prev != h => {
                    return Err(OutputError::Malformed {
                        path,
                        msg: "header differs from rank 0".into(),
                    })
                }
                Some(_) => {}
            }
            for line in lines {
                let line = line.map_err(io_err(&path))?;
                let gi = line
                    .split(',')
                    .next()
                    .and_then(|s| s.parse::<usize>().ok())
                    .ok_or_else(|| OutputError::Malformed {
                        path: path.clone(),
                        msg: format!("bad row: {line}"),
                    })?;
                rows.push((gi, line));
            }
        }
        rows.sort_by_key(|(g, _)| *g);
        let mut text = header.unwrap_or_default();
        text.push('\n');
        for (_, l) in rows {
            text.push_str(&l);
            text.push('\n');
        }
        let path = run_dir.join(format!("snap_t{time}_merged.csv"));
        fs::write(&path, text).map_err(io_err(&path))?;
        out.push(path);
    }
    Ok(out)
}

/// Contents of `run_meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub version: String,
    pub deck: String,
    pub method: Method,
    pub n_workers: usize,
    pub config: SolverConfig,
    /// SHA-256 of the cell-to-rank map.
    pub partition_hash: String,
    pub phases: Vec<Phase>,
    /// Moles in place per component at the start of the run.
    pub initial_moles: Vec<f64>,
    pub stats: RunStatsRecord,
    pub wall_time_s: f64,
    pub completed: bool,
}

/// Serializable mirror of [`RunStats`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStatsRecord {
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

impl From<&RunStats> for RunStatsRecord {
    fn from(s: &RunStats) -> Self {
        RunStatsRecord {
            steps: s.steps,
            cuts: s.cuts,
            nr: s.nr,
            wasted_nr: s.wasted_nr,
            ls: s.ls,
            wasted_ls: s.wasted_ls,
            nr_local: s.nr_local,
            wasted_nr_local: s.wasted_nr_local,
            ls_local: s.ls_local,
            wasted_ls_local: s.wasted_ls_local,
        }
    }
}

pub fn partition_hash(owner: &[usize]) -> String {
    let mut h = Sha256::new();
    for &o in owner {
        h.update((o as u64).to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn write_meta(run_dir: &Path, meta: &RunMeta) -> Result<(), OutputError> {
    let path = run_dir.join(META_FILE);
    let text = serde_json::to_string_pretty(meta).expect("metadata serializes");
    fs::write(&path, text + "\n").map_err(io_err(&path))
}

pub fn read_meta(run_dir: &Path) -> Result<RunMeta, OutputError> {
    let path = run_dir.join(META_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    serde_json::from_str(&text).map_err(|e| OutputError::Malformed {
        path,
        msg: e.to_string(),
    })
}

/// Iteration statistics in the layout of the method comparison table:
/// wasted iterations in parentheses.
pub fn stats_table(rows: &[(&str, &RunStatsRecord, f64)]) -> String {
    let mut s = format!(
        "{:<10} {:>12} {:>14} {:>14} {:>7} {:>13}\n",
        "Method", "NumTimeSteps", "NRiters", "LSiters", "LS/NR", "Wall Time (s)"
    );
    for (name, st, wall) in rows {
        let ratio = if st.nr == 0 { 0.0 } else { st.ls as f64 / st.nr as f64 };
        s.push_str(&format!(
            "{:<10} {:>12} {:>14} {:>14} {:>7.2} {:>13.2}\n",
            name,
            st.steps,
            format!("{} ({})", st.nr, st.wasted_nr),
            format!("{} ({})", st.ls, st.wasted_ls),
            ratio,
            wall
        ));
        if st.nr_local > 0 {
            s.push_str(&format!(
                "{:<10} {:>12} {:>14} {:>14}\n",
                "  local",
                "",
                format!("{} ({})", st.nr_local, st.wasted_nr_local),
                format!("{} ({})", st.ls_local, st.wasted_ls_local),
            ));
        }
    }
    s
}

pub fn method_name(m: Method) -> &'static str {
    match m {
        Method::Fim => "FIM",
        Method::Impec => "IMPEC",
        Method::CddmFim => "CDDM-FIM",
        Method::AddmFim => "ADDM-FIM",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(t: f64) -> SummaryRow {
        SummaryRow {
            columns: vec![("TIME".into(), f(t)), ("FPR".into(), f(2e7))],
        }
    }

    #[test]
    fn header_once() {
        let dir = tempfile::tempdir().unwrap();
        write_summary_row(dir.path(), &row(1.0)).unwrap();
        write_summary_row(dir.path(), &row(2.0)).unwrap();
        let (h, rows) = read_summary(dir.path()).unwrap();
        assert_eq!(h, vec!["TIME", "FPR"]);
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1][0].parse::<f64>().unwrap(), 2.0);
    }

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, 2.5e7 + 1e-9, -7.25e-300] {
            assert_eq!(f(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn shard_names() {
        assert_eq!(parse_shard_name("snap_t10.0000_r3.csv"), Some(("10.0000".into(), 3)));
        assert_eq!(parse_shard_name("snap_t10.0000_merged.csv"), None);
        assert_eq!(parse_shard_name("summary.csv"), None);
    }

    fn cell(g: usize) -> CellRow {
        CellRow {
            global_index: g,
            p: 1e7 + g as f64,
            s: vec![1.0],
            n: vec![5.0],
        }
    }

    #[test]
    fn gather_sorts_and_is_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let ph = [Phase::Water];
        write_snapshot(dir.path(), 0, &[cell(3), cell(0)], &ph, 5.0).unwrap();
        write_snapshot(dir.path(), 1, &[cell(2), cell(1)], &ph, 5.0).unwrap();
        let merged = gather_outputs(dir.path()).unwrap();
        assert_eq!(merged.len(), 1);
        let first = fs::read_to_string(&merged[0]).unwrap();
        let idx: Vec<&str> = first.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
        assert_eq!(idx, vec!["0", "1", "2", "3"]);
        gather_outputs(dir.path()).unwrap();
        assert_eq!(fs::read_to_string(&merged[0]).unwrap(), first);
    }

    #[test]
    fn single_shard_merges_to_itself() {
        let dir = tempfile::tempdir().unwrap();
        let shard = write_snapshot(dir.path(), 0, &[cell(0), cell(1)], &[Phase::Water], 1.0).unwrap();
        let merged = gather_outputs(dir.path()).unwrap();
        assert_eq!(fs::read(&merged[0]).unwrap(), fs::read(shard).unwrap());
    }

    #[test]
    fn missing_shard() {
        let dir = tempfile::tempdir().unwrap();
        let ph = [Phase::Water];
        write_snapshot(dir.path(), 0, &[cell(0)], &ph, 1.0).unwrap();
        write_snapshot(dir.path(), 2, &[cell(1)], &ph, 1.0).unwrap();
        assert!(matches!(
            gather_outputs(dir.path()),
            Err(OutputError::MissingShard { rank: 1, .. })
        ));
    }

    #[test]
    fn stats_table_layout() {
        let st = RunStatsRecord {
            steps: 455,
            nr: 1493,
            wasted_nr: 7,
            ls: 6337,
            wasted_ls: 132,
            ..RunStatsRecord::default()
        };
        let t = stats_table(&[("FIM", &st, 1068.0)]);
        assert!(t.contains("1493 (7)"));
        assert!(t.contains("6337 (132)"));
        assert!(t.contains("4.24"));
    }
}
