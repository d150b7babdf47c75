use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(config: &str, dir: &Path, extra: &[&str]) -> Output {
    let cfg = dir.join("config.json");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_pullback-lattice"))
        .arg("run")
        .arg("--config")
        .arg(&cfg)
        .args(extra)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

const SMALL_ABSORB: &str = r#"{
  "model": {"name": "canonical", "truncation_radius": 16},
  "run": {"experiment": "absorb", "t_list": [1, 2], "ensemble_size": 6, "T": 1, "S": 30}
}"#;

#[test]
fn identical_invocations_write_identical_csvs() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        let o = run(SMALL_ABSORB, tmp.path(), &["--out-dir", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}{}", stdout(&o), stderr(&o));
    }
    let (fa, fb) = (read_dir_sorted(&a), read_dir_sorted(&b));
    assert!(fa.iter().any(|(n, _)| n == "absorb.csv"));
    assert_eq!(fa, fb);
}

#[test]
fn seed_override_changes_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run(SMALL_ABSORB, tmp.path(), &["--out-dir", a.to_str().unwrap(), "--seed", "1"]);
    run(SMALL_ABSORB, tmp.path(), &["--out-dir", b.to_str().unwrap(), "--seed", "2"]);
    assert_ne!(fs::read(a.join("absorb.csv")).unwrap(), fs::read(b.join("absorb.csv")).unwrap());
}

#[test]
fn absorb_csv_has_entry_time_column() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = run(SMALL_ABSORB, tmp.path(), &["--out-dir", out.to_str().unwrap()]);
    assert!(stdout(&o).contains("PASS absorbed"), "{}", stdout(&o));
    let mut reader = csv::Reader::from_path(out.join("absorb.csv")).unwrap();
    assert_eq!(reader.headers().unwrap(), vec!["t", "member", "norm", "R", "entry_time"]);
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 2 * 6);
    for row in &rows {
        let norm: f64 = row[2].parse().unwrap();
        let radius: f64 = row[3].parse().unwrap();
        assert!(norm.is_finite() && radius >= 1.0);
    }
}

#[test]
fn check_assumptions_passes_on_canonical() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = run(
        r#"{"model": {"name": "canonical"}, "run": {"experiment": "check-assumptions"}}"#,
        tmp.path(),
        &["--out-dir", out.to_str().unwrap()],
    );
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("PASS assumptions"));
    let text = fs::read_to_string(out.join("assumptions.csv")).unwrap();
    assert!(text.starts_with("quantity,value\n"));
    assert!(text.contains("lambda_tilde,8.71620"));
}

#[test]
fn invalid_step_is_rejected_by_key() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(r#"{"run": {"experiment": "absorb", "dt_ode": -1}}"#, tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("run.dt_ode"), "{}", stderr(&o));
}

#[test]
fn short_window_is_rejected_before_compute() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(
        r#"{"noise": {"t_min": -50, "t_max": 1}, "run": {"experiment": "pullback", "t_list": [5, 10, 20, 40], "S": 60}}"#,
        tmp.path(),
        &[],
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("-100"), "{}", stderr(&o));
}

#[test]
fn unknown_key_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(r#"{"run": {"experiment": "tail", "typo": 1}}"#, tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("typo"), "{}", stderr(&o));
}

#[test]
fn failing_predicate_exits_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = run(
        r#"{"run": {"experiment": "ou-diagnostics", "T": 10, "ensemble_size": 2, "tol": 1e-300}}"#,
        tmp.path(),
        &["--out-dir", out.to_str().unwrap()],
    );
    assert_eq!(o.status.code(), Some(2), "{}", stdout(&o));
    assert!(stdout(&o).contains("FAIL ou-variance"));
    assert!(out.join("ou_moments.csv").exists());
}
