use defsc::harness::{
    emit_report, read_report, read_rows_csv, run_experiment, scaling_fit, write_rows_csv, ExperimentKind,
    ExperimentSpec, Report, ReportFormat, Row, RunOptions, ScalingAxis, ROWS_FILE,
};
use defsc::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

const UNIFORM: &str = r#"{"kind": "jacobi", "alpha": 0, "beta": 0, "d": [1]}"#;

fn spec(kind: &str, n: &str, trials: usize, extra: &str) -> ExperimentSpec {
    ExperimentSpec::from_json(&format!(
        r#"{{"kind": "{kind}", "ensemble": {{"n": {n}, "lambda": [0.5], "mu": {UNIFORM}, "seed": 3}},
            "trials": {trials} {extra}}}"#
    ))
    .unwrap()
}

fn row(n: usize, eta: f64, value: f64) -> Row {
    Row {
        kind: ExperimentKind::LocalLaw,
        n,
        lambda: 0.5,
        trial: 0,
        seed: 0,
        statistic: "s".into(),
        point: None,
        e: None,
        eta: Some(eta),
        width: None,
        i: None,
        j: None,
        value: Some(value),
        bound: None,
        ratio: None,
        ok: true,
        error: None,
    }
}

fn synthetic(rows: Vec<Row>) -> Report {
    let mut r = run_experiment(&spec("FreeConvOnly", "[10]", 1, r#", "z_grid": {"points": [{"e": 0, "eta": 1}]}"#), &RunOptions::default()).unwrap();
    r.rows = rows;
    r
}

#[test]
fn thousand_rows_give_thousand_lines() {
    let s = spec("LocalLaw", "[40]", 1000, r#", "z_grid": {"points": [{"e": 0.1, "eta": 0.2}]}"#);
    let report = run_experiment(&s, &RunOptions { threads: Some(2), seed: None }).unwrap();
    assert_eq!(report.rows.len(), 1000);
    let dir = tempfile::tempdir().unwrap();
    emit_report(&report, dir.path(), ReportFormat::Csv).unwrap();
    let text = std::fs::read_to_string(dir.path().join(ROWS_FILE)).unwrap();
    assert_eq!(text.lines().count(), 1001);
    assert_eq!(read_rows_csv(&dir.path().join(ROWS_FILE)).unwrap(), report.rows);
}

#[test]
fn empty_rows_write_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rows.csv");
    write_rows_csv(&[], &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("kind,n,lambda,trial,seed,statistic"));
    assert!(read_rows_csv(&path).unwrap().is_empty());
}

#[test]
fn structured_report_round_trips_exactly() {
    let s = spec("LocalLaw", "[60, 90]", 7, r#", "z_grid": {"points": [{"e": -0.4, "eta": 0.05}, {"e": 0.3, "eta": 0.1}]}"#);
    let report = run_experiment(&s, &RunOptions { threads: Some(1), seed: Some(11) }).unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit_report(&report, dir.path(), ReportFormat::StructuredText).unwrap();
    let back = read_report(dir.path()).unwrap();
    assert_eq!(back.aggregates, report.aggregates);
    assert_eq!(back, report);
    let again = defsc::harness::aggregate(&back.rows, &back.spec.quantiles);
    assert_eq!(again, report.aggregates);
}

#[test]
fn reports_are_independent_of_thread_count() {
    let s = spec("Rigidity", "[80]", 6, "");
    let a = run_experiment(&s, &RunOptions { threads: Some(1), seed: None }).unwrap();
    let b = run_experiment(&s, &RunOptions { threads: Some(4), seed: None }).unwrap();
    assert_eq!(a.rows, b.rows);
    assert_eq!(a.aggregates, b.aggregates);
}

#[test]
fn scaling_fit_recovers_inverse_law() {
    let rows = [100, 200, 400, 800, 1600].iter().map(|&n| row(n, 0.1, 3.0 / n as f64)).collect();
    let (slope, intercept, r2) = scaling_fit(&synthetic(rows), ScalingAxis::N, "s").unwrap();
    assert!((slope + 1.0).abs() < 1e-12);
    assert!((intercept - 3f64.ln()).abs() < 1e-10);
    assert!((r2 - 1.0).abs() < 1e-12);
}

#[test]
fn scaling_fit_tolerates_noise() {
    let mut rng = ChaCha20Rng::seed_from_u64(17);
    let mut rows = Vec::new();
    for k in 0..8 {
        let eta = 0.01 * 2f64.powi(k);
        for _ in 0..9 {
            let noise = 1.0 + 0.05 * (rng.random::<f64>() - 0.5);
            rows.push(row(100, eta, eta.powf(-0.5) * noise));
        }
    }
    let (slope, _, _) = scaling_fit(&synthetic(rows), ScalingAxis::Eta, "s").unwrap();
    assert!((-0.55..=-0.45).contains(&slope), "slope {slope}");
}

#[test]
fn scaling_fit_needs_three_abscissae() {
    let rows = vec![row(100, 0.1, 1.0), row(200, 0.1, 0.5), row(200, 0.1, 0.4)];
    assert!(matches!(
        scaling_fit(&synthetic(rows), ScalingAxis::N, "s"),
        Err(Error::InsufficientPoints { found: 2 })
    ));
}

#[test]
fn spec_rejects_unknown_fields() {
    for bad in [
        r#"{"kind": "LocalLaw", "ensemble": {"n": [10], "lambda": [0.5], "mu": {"kind": "jacobi", "alpha": 0, "beta": 0, "d": [1]}}, "colour": 1}"#,
        r#"{"kind": "LocalLaw", "ensemble": {"n": [10], "lambda": [0.5], "mu": {"kind": "jacobi", "alpha": 0, "beta": 0, "d": [1]}, "size": 3}}"#,
        r#"{"kind": "Nope", "ensemble": {"n": [10], "lambda": [0.5], "mu": {"kind": "jacobi", "alpha": 0, "beta": 0, "d": [1]}}}"#,
        r#"{"kind": "LocalLaw", "ensemble": {"n": [10], "lambda": [-0.5], "mu": {"kind": "jacobi", "alpha": 0, "beta": 0, "d": [1]}}}"#,
        r#"{"kind": "LocalLaw", "ensemble": {"n": [10], "lambda": [0.5], "mu": {"kind": "jacobi", "alpha": 0, "beta": 0, "d": [1]}}, "tolerances": {"fudge": 2}}"#,
    ] {
        assert!(matches!(ExperimentSpec::from_json(bad), Err(Error::Config(_))), "{bad}");
    }
}
