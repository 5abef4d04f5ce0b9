use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use strata::testing::waterflood_deck;

fn strata(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_strata"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn flood(dir: &Path) -> String {
    let path = dir.join("flood.data");
    fs::write(&path, waterflood_deck(8, 8, 50.0, 20, 10, " DT 0.1 2 1e-6 /\n")).unwrap();
    path.display().to_string()
}

#[test]
fn run_writes_run_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let deck = flood(tmp.path());
    let o = strata(&["run", &deck, "--workers", "2"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = tmp.path().join("flood.out");
    for f in ["summary.csv", "run_meta.json", "snap_t0.0000_r0.csv", "snap_t0.0000_r1.csv", "snap_t20.0000_merged.csv"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let text = stdout(&o);
    assert!(text.contains("FIM"), "{text}");
    assert!(text.contains("run directory"), "{text}");
}

#[test]
fn missing_deck_exits_with_io() {
    let tmp = tempfile::tempdir().unwrap();
    let o = strata(&["run", "absent.data"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.contains("absent.data: no such file"), "{err}");
}

#[test]
fn syntax_error_names_line() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.data");
    fs::write(&path, "DIMENS\n 2 1 1 /\nDX\n 10 ten /\n").unwrap();
    let o = strata(&["validate", path.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.contains("line 4"), "{err}");
}

#[test]
fn validate_lists_every_violation() {
    let tmp = tempfile::tempdir().unwrap();
    let text = waterflood_deck(4, 4, 50.0, 20, 10, " WORKERS 0 /\n")
        .replacen("PORO\n 16*0.2 /", "PORO\n 0 15*0.2 /", 1)
        .replacen("ROCK\n 200 1e-5 /", "ROCK\n 200 -1e-5 /", 1);
    let path = tmp.path().join("invalid.data");
    fs::write(&path, text).unwrap();
    let o = strata(&["validate", path.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    let listed = stdout(&o);
    assert!(listed.contains("PORO"), "{listed}");
    assert!(listed.contains("ROCK"), "{listed}");
    assert!(listed.contains("WORKERS"), "{listed}");
    assert!(stderr(&o).contains("3 violation(s)"), "{}", stderr(&o));

    let ok = strata(&["validate", &flood(tmp.path())], tmp.path());
    assert_eq!(ok.status.code(), Some(0));
    assert!(stdout(&ok).ends_with(": ok\n"));
}

#[test]
fn unmeetable_rate_exits_with_solver_error() {
    let tmp = tempfile::tempdir().unwrap();
    let text = waterflood_deck(4, 4, 1e9, 20, 10, " DT 0.1 2 0.01 /\n");
    let path = tmp.path().join("dead.data");
    fs::write(&path, text).unwrap();
    let o = strata(&["run", path.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert_eq!(stderr(&o).lines().count(), 1);
    let meta = fs::read_to_string(tmp.path().join("dead.out/run_meta.json")).unwrap();
    assert!(meta.contains("\"completed\": false"), "{meta}");
}

#[test]
fn reruns_are_bit_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let deck = flood(tmp.path());
    let files = |dir: &str| -> Vec<(String, Vec<u8>)> {
        let mut v: Vec<(String, Vec<u8>)> = fs::read_dir(tmp.path().join(dir))
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.extension().is_some_and(|e| e == "csv"))
            .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
            .collect();
        v.sort();
        v
    };
    for (i, dir) in ["a", "b"].iter().enumerate() {
        let o = strata(&["run", &deck, "--workers", "4", "--method", "ADDM_FIM", "--out", dir], tmp.path());
        assert_eq!(o.status.code(), Some(0), "run {i}: {}", stderr(&o));
    }
    let (a, b) = (files("a"), files("b"));
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn addm_and_fim_agree() {
    let tmp = tempfile::tempdir().unwrap();
    let deck = flood(tmp.path());
    let mut fpr: Vec<Vec<(f64, f64)>> = Vec::new();
    for m in ["FIM", "ADDM_FIM"] {
        let o = strata(&["run", &deck, "--workers", "4", "--method", m, "--out", m], tmp.path());
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let text = fs::read_to_string(tmp.path().join(m).join("summary.csv")).unwrap();
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().unwrap().split(',').collect();
        let (ti, fi) = (
            header.iter().position(|h| *h == "TIME").unwrap(),
            header.iter().position(|h| *h == "FPR").unwrap(),
        );
        let series: Vec<(f64, f64)> = lines
            .map(|l| {
                let v: Vec<&str> = l.split(',').collect();
                (v[ti].parse().unwrap(), v[fi].parse().unwrap())
            })
            .filter(|&(t, _): &(f64, f64)| (t / 10.0 - (t / 10.0).round()).abs() < 1e-9)
            .collect();
        fpr.push(series);
    }
    assert_eq!(fpr[0].len(), 2);
    for (a, b) in fpr[0].iter().zip(&fpr[1]) {
        assert_eq!(a.0, b.0);
        assert!((a.1 - b.1).abs() <= 1e-3 * a.1, "t={}: {} vs {}", a.0, a.1, b.1);
    }
}

#[test]
fn report_is_idempotent() {
    let tmp = tempfile::tempdir().unwrap();
    let deck = flood(tmp.path());
    let o = strata(&["run", &deck, "--workers", "2", "--dump-domain", "--out", "r"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(tmp.path().join("r/domain.json").is_file());
    let merged = tmp.path().join("r/snap_t10.0000_merged.csv");
    let first_bytes = fs::read(&merged).unwrap();
    let first = strata(&["report", "r"], tmp.path());
    let second = strata(&["report", "r"], tmp.path());
    assert_eq!(first.status.code(), Some(0), "{}", stderr(&first));
    assert_eq!(stdout(&first), stdout(&second));
    assert!(stdout(&first).contains("3 merged snapshots"), "{}", stdout(&first));
    assert_eq!(fs::read(&merged).unwrap(), first_bytes);
}

#[test]
fn report_on_empty_or_missing_dir() {
    let tmp = tempfile::tempdir().unwrap();
    fs::create_dir(tmp.path().join("empty")).unwrap();
    for dir in ["empty", "nowhere"] {
        let o = strata(&["report", dir], tmp.path());
        assert_eq!(o.status.code(), Some(2), "{dir}: {}", stderr(&o));
        assert_eq!(stderr(&o).lines().count(), 1);
    }
}

#[test]
fn bad_arguments_are_validation_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let o = strata(&["run"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    let o = strata(&["run", "x.data", "--method", "SFI"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    let o = strata(&["--help"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("validate"));
}
