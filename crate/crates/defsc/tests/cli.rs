use std::path::Path;
use std::process::{Command, Output};

const UNIFORM: &str = r#"{"kind": "jacobi", "alpha": 0, "beta": 0, "d": [1]}"#;

fn defsc(args: &[&str], threads_env: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_defsc"));
    cmd.args(args).env_remove("DEFSC_THREADS");
    if let Some(t) = threads_env {
        cmd.env("DEFSC_THREADS", t);
    }
    cmd.output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn local_law_spec(dir: &Path) -> String {
    write(
        dir,
        "spec.json",
        &format!(
            r#"{{"kind": "LocalLaw", "ensemble": {{"n": [60], "lambda": [0.5], "mu": {UNIFORM}}},
                "z_grid": {{"points": [{{"e": 0.0, "eta": 0.2}}]}}, "trials": 4}}"#
        ),
    )
}

#[test]
fn fcsolve_writes_solution() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(dir.path(), "m.json", UNIFORM);
    let g = write(dir.path(), "g.json", r#"[{"e": 0.0, "eta": 0.01}, {"e": 1.5, "eta": 0.01}]"#);
    let out = dir.path().join("sol.json");
    let o = defsc(&["fcsolve", "--measure", &m, "--lambda", "0.7", "--grid", &g, "--out", out.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let sol = defsc::freeconv::read_export(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(sol.grid.len(), 2);
    assert!(sol.grid.iter().all(|(_, m)| m.im > 0.0));
}

#[test]
fn fcsolve_accepts_grid_descriptor() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(dir.path(), "m.json", UNIFORM);
    let g = write(dir.path(), "g.json", r#"{"grid": {"e_min": -1, "e_max": 1, "e_count": 5, "eta": {"fixed": [0.1, 0.01]}}}"#);
    let out = dir.path().join("sol.json");
    let o = defsc(&["fcsolve", "--measure", &m, "--lambda", "0.3", "--grid", &g, "--out", out.to_str().unwrap()], None);
    assert!(o.status.success());
    let sol = defsc::freeconv::read_export(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(sol.grid.len(), 10);
}

#[test]
fn run_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let spec = local_law_spec(dir.path());
    let out = dir.path().join("out");
    let o = defsc(&["run", "--spec", &spec, "--out", out.to_str().unwrap(), "--threads", "2", "--seed", "5"], None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("PASS row_success"));
    for f in ["rows.csv", "aggregates.csv", "report.json", "manifest.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let before = std::fs::read(out.join("rows.csv")).unwrap();
    std::fs::remove_file(out.join("rows.csv")).unwrap();
    let o = defsc(&["report", "--in", out.to_str().unwrap(), "--format", "csv"], None);
    assert!(o.status.success());
    assert_eq!(std::fs::read(out.join("rows.csv")).unwrap(), before);
}

#[test]
fn thread_count_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let spec = local_law_spec(dir.path());
    let out = dir.path().join("out");
    let o = defsc(&["run", "--spec", &spec, "--out", out.to_str().unwrap()], Some("3"));
    assert!(o.status.success());
    let report = defsc::harness::read_report(&out).unwrap();
    assert_eq!(report.provenance.threads, 3);

    let o = defsc(&["run", "--spec", &spec, "--out", out.to_str().unwrap(), "--threads", "2"], Some("3"));
    assert!(o.status.success());
    assert_eq!(defsc::harness::read_report(&out).unwrap().provenance.threads, 2);

    let o = defsc(&["run", "--spec", &spec, "--out", out.to_str().unwrap()], Some("many"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn list_kinds_covers_every_kind() {
    let o = defsc(&["list-kinds"], None);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(text.lines().count(), defsc::harness::ExperimentKind::ALL.len());
    for kind in defsc::harness::ExperimentKind::ALL {
        assert!(text.lines().any(|l| l.split('\t').next() == Some(kind.name())), "{kind}");
    }
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "bad.json", r#"{"kind": "LocalLaw", "ensemble": {"n": [10]}, "bogus": true}"#);
    let out = dir.path().join("out");
    let o = defsc(&["run", "--spec", &spec, "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    let o = defsc(&["run", "--spec", "/nonexistent/spec.json", "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    let m = write(dir.path(), "m.json", UNIFORM);
    let g = write(dir.path(), "g.json", r#"[{"e": 0.0, "eta": 0.1}]"#);
    let o = defsc(&["fcsolve", "--measure", &m, "--lambda", "-1", "--grid", &g, "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numerical_failures_exit_with_three() {
    // The fit range exceeds a tenth of the support width, so every slope row fails.
    let dir = tempfile::tempdir().unwrap();
    let spec = write(
        dir.path(),
        "edge.json",
        &format!(
            r#"{{"kind": "EdgeExponent", "ensemble": {{"n": [100], "lambda": [0.5], "mu": {UNIFORM}}},
                "params": {{"kappa_min": 0.01, "kappa_max": 2.0, "edge": "both"}}}}"#
        ),
    );
    let out = dir.path().join("out");
    let o = defsc(&["run", "--spec", &spec, "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    let report = defsc::harness::read_report(&out).unwrap();
    assert!(report.rows.iter().any(|r| !r.ok && r.error.is_some()));
}
