//! Report rows, aggregates and their on-disk formats.
//!
//! `rows.csv` columns, in order: `kind, n, lambda, trial, seed, statistic,
//! point, e, eta, width, i, j, value, bound, ratio, ok, error`. Optional
//! columns are empty when they do not apply. `aggregates.csv` columns:
//! `kind, n, lambda, statistic, point, e, eta, width, count, failed, median,
//! q05, q95, ratio_median, ratio_q95, ratio_max`.

use super::spec::{ExperimentKind, ExperimentSpec};
use crate::error::{Error, Result};
use crate::freeconv::least_squares;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

pub const ROWS_FILE: &str = "rows.csv";
pub const AGGREGATES_FILE: &str = "aggregates.csv";
pub const REPORT_FILE: &str = "report.json";
pub const MANIFEST_FILE: &str = "manifest.json";

/// One statistic of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub kind: ExperimentKind,
    pub n: usize,
    pub lambda: f64,
    pub trial: u64,
    /// Together with `trial`, regenerates the sample.
    pub seed: u64,
    pub statistic: String,
    /// Index into the kind's grid (z point, window, ...).
    pub point: Option<usize>,
    pub e: Option<f64>,
    pub eta: Option<f64>,
    pub width: Option<f64>,
    pub i: Option<usize>,
    pub j: Option<usize>,
    pub value: Option<f64>,
    pub bound: Option<f64>,
    pub ratio: Option<f64>,
    pub ok: bool,
    pub error: Option<String>,
}

impl Row {
    pub(crate) fn new(kind: ExperimentKind, n: usize, lambda: f64, trial: u64, seed: u64, statistic: &str) -> Self {
        Self {
            kind,
            n,
            lambda,
            trial,
            seed,
            statistic: statistic.to_string(),
            point: None,
            e: None,
            eta: None,
            width: None,
            i: None,
            j: None,
            value: None,
            bound: None,
            ratio: None,
            ok: false,
            error: None,
        }
    }

    pub(crate) fn with_value(mut self, value: f64, bound: Option<f64>) -> Self {
        self.value = Some(value);
        self.bound = bound;
        self.ratio = bound.map(|b| value / b);
        self.ok = value.is_finite();
        if !self.ok {
            self.value = None;
            self.ratio = None;
            self.error = Some(format!("non-finite statistic {value}"));
        }
        self
    }

    pub(crate) fn failed(mut self, err: &Error) -> Self {
        self.ok = false;
        self.error = Some(err.to_string());
        self
    }
}

/// Summary of one cell `(n, λ, statistic, point)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub kind: ExperimentKind,
    pub n: usize,
    pub lambda: f64,
    pub statistic: String,
    pub point: Option<usize>,
    pub e: Option<f64>,
    pub eta: Option<f64>,
    pub width: Option<f64>,
    pub count: usize,
    pub failed: usize,
    pub median: Option<f64>,
    pub q05: Option<f64>,
    pub q95: Option<f64>,
    pub ratio_median: Option<f64>,
    pub ratio_q95: Option<f64>,
    pub ratio_max: Option<f64>,
    /// `(p, value)` for each requested quantile.
    pub quantiles: Vec<(f64, f64)>,
}

#[derive(Serialize)]
struct AggregateCsv<'a> {
    kind: ExperimentKind,
    n: usize,
    lambda: f64,
    statistic: &'a str,
    point: Option<usize>,
    e: Option<f64>,
    eta: Option<f64>,
    width: Option<f64>,
    count: usize,
    failed: usize,
    median: Option<f64>,
    q05: Option<f64>,
    q95: Option<f64>,
    ratio_median: Option<f64>,
    ratio_q95: Option<f64>,
    ratio_max: Option<f64>,
}

/// Pass/fail of one report-level rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Seeds and timing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub threads: usize,
    pub wall_clock_seconds: f64,
    pub crate_version: String,
}

/// Everything a run produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub spec: ExperimentSpec,
    pub rows: Vec<Row>,
    pub aggregates: Vec<Aggregate>,
    pub rules: Vec<RuleOutcome>,
    /// Non-fatal configuration warnings.
    pub flags: Vec<String>,
    pub provenance: Provenance,
}

impl Report {
    /// Fraction of rows that succeeded (1 for an empty report).
    pub fn success_fraction(&self) -> f64 {
        if self.rows.is_empty() {
            return 1.0;
        }
        self.rows.iter().filter(|r| r.ok).count() as f64 / self.rows.len() as f64
    }

    pub fn passed(&self) -> bool {
        self.rules.iter().all(|r| r.passed)
    }

    /// Successful values of `statistic`, in row order.
    pub fn values(&self, statistic: &str) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.ok && r.statistic == statistic)
            .filter_map(|r| r.value)
            .collect()
    }
}

/// Sample quantile with linear interpolation between order statistics
/// (`h = (n − 1)p`). `sorted` must be ascending and nonempty.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Quantile of an unsorted sample.
pub fn quantile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, p)
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

/// Groups rows into cells and summarises each; cells appear in order of first occurrence.
pub fn aggregate(rows: &[Row], quantiles: &[f64]) -> Vec<Aggregate> {
    let mut order: Vec<(usize, u64, String, Option<usize>)> = Vec::new();
    let mut cells: BTreeMap<(usize, u64, String, Option<usize>), Vec<&Row>> = BTreeMap::new();
    for r in rows {
        let key = (r.n, r.lambda.to_bits(), r.statistic.clone(), r.point);
        let slot = cells.entry(key.clone()).or_default();
        if slot.is_empty() {
            order.push(key);
        }
        slot.push(r);
    }
    order
        .into_iter()
        .map(|key| {
            let members = &cells[&key];
            let first = members[0];
            let mut vals: Vec<f64> = members.iter().filter(|r| r.ok).filter_map(|r| r.value).collect();
            let mut ratios: Vec<f64> = members.iter().filter(|r| r.ok).filter_map(|r| r.ratio).collect();
            vals.sort_by(f64::total_cmp);
            ratios.sort_by(f64::total_cmp);
            let q = |v: &[f64], p: f64| (!v.is_empty()).then(|| quantile_sorted(v, p));
            Aggregate {
                kind: first.kind,
                n: first.n,
                lambda: first.lambda,
                statistic: first.statistic.clone(),
                point: first.point,
                e: if first.point.is_some() { first.e } else { None },
                eta: if first.point.is_some() { first.eta } else { None },
                width: if first.point.is_some() { first.width } else { None },
                count: vals.len(),
                failed: members.len() - vals.len(),
                median: q(&vals, 0.5),
                q05: q(&vals, 0.05),
                q95: q(&vals, 0.95),
                ratio_median: q(&ratios, 0.5),
                ratio_q95: q(&ratios, 0.95),
                ratio_max: ratios.last().copied(),
                quantiles: if vals.is_empty() {
                    Vec::new()
                } else {
                    quantiles.iter().map(|&p| (p, quantile_sorted(&vals, p))).collect()
                },
            }
        })
        .collect()
}

/// On-disk format for [`emit_report`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ReportFormat {
    Csv,
    #[value(alias = "json")]
    StructuredText,
}

/// Writes `rows.csv`.
pub fn write_rows_csv(rows: &[Row], path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record([
        "kind", "n", "lambda", "trial", "seed", "statistic", "point", "e", "eta", "width", "i", "j", "value",
        "bound", "ratio", "ok", "error",
    ])?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `rows.csv`.
pub fn read_rows_csv(path: &Path) -> Result<Vec<Row>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

fn write_aggregates_csv(aggs: &[Aggregate], path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record([
        "kind", "n", "lambda", "statistic", "point", "e", "eta", "width", "count", "failed", "median", "q05",
        "q95", "ratio_median", "ratio_q95", "ratio_max",
    ])?;
    for a in aggs {
        w.serialize(AggregateCsv {
            kind: a.kind,
            n: a.n,
            lambda: a.lambda,
            statistic: &a.statistic,
            point: a.point,
            e: a.e,
            eta: a.eta,
            width: a.width,
            count: a.count,
            failed: a.failed,
            median: a.median,
            q05: a.q05,
            q95: a.q95,
            ratio_median: a.ratio_median,
            ratio_q95: a.ratio_q95,
            ratio_max: a.ratio_max,
        })?;
    }
    w.flush()?;
    Ok(())
}

fn git_describe() -> Option<String> {
    let out = std::process::Command::new("git")
        .args(["describe", "--always", "--dirty", "--tags"])
        .output()
        .ok()?;
    out.status
        .success()
        .then(|| String::from_utf8_lossy(&out.stdout).trim().to_string())
        .filter(|s| !s.is_empty())
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    spec: ExperimentSpec,
    git_describe: Option<String>,
    seed: u64,
    threads: usize,
    wall_clock_seconds: f64,
    crate_version: String,
    rows: usize,
    success_fraction: f64,
    rules: Vec<RuleOutcome>,
    files: Vec<String>,
}

/// Writes the report into `dir` in `format`, plus `manifest.json`; returns the paths written.
pub fn emit_report(report: &Report, dir: &Path, format: ReportFormat) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    match format {
        ReportFormat::Csv => {
            let rows = dir.join(ROWS_FILE);
            write_rows_csv(&report.rows, &rows)?;
            let aggs = dir.join(AGGREGATES_FILE);
            write_aggregates_csv(&report.aggregates, &aggs)?;
            files.extend([rows, aggs]);
        }
        ReportFormat::StructuredText => {
            let path = dir.join(REPORT_FILE);
            fs::write(&path, serde_json::to_string_pretty(report)?)?;
            files.push(path);
        }
    }
    let manifest = Manifest {
        spec: report.spec.clone(),
        git_describe: git_describe(),
        seed: report.provenance.seed,
        threads: report.provenance.threads,
        wall_clock_seconds: report.provenance.wall_clock_seconds,
        crate_version: report.provenance.crate_version.clone(),
        rows: report.rows.len(),
        success_fraction: report.success_fraction(),
        rules: report.rules.clone(),
        files: files
            .iter()
            .filter_map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()))
            .collect(),
    };
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
    files.push(path);
    Ok(files)
}

/// Reads `report.json` from `dir`.
pub fn read_report(dir: &Path) -> Result<Report> {
    let text = fs::read_to_string(dir.join(REPORT_FILE))?;
    Ok(serde_json::from_str(&text)?)
}

/// Abscissa of [`scaling_fit`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScalingAxis {
    N,
    Eta,
}

/// Log-log least squares of the per-`x` median of `statistic`;
/// returns `(slope, intercept, r²)`.
pub fn scaling_fit(report: &Report, axis: ScalingAxis, statistic: &str) -> Result<(f64, f64, f64)> {
    let mut groups: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for r in report.rows.iter().filter(|r| r.ok && r.statistic == statistic) {
        let x = match axis {
            ScalingAxis::N => Some(r.n as f64),
            ScalingAxis::Eta => r.eta,
        };
        if let (Some(x), Some(v)) = (x, r.value) {
            if x > 0.0 && v > 0.0 {
                groups.entry(x.to_bits()).or_default().push(v);
            }
        }
    }
    if groups.len() < 3 {
        return Err(Error::InsufficientPoints { found: groups.len() });
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = groups
        .iter()
        .map(|(x, v)| (f64::from_bits(*x).ln(), median(v).ln()))
        .unzip();
    Ok(least_squares(&xs, &ys))
}
