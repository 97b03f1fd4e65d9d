//! Experiment execution.

use super::bounds::{predicted_bound, BoundParams, Calibration};
use super::report::{aggregate, Provenance, Report, Row, RuleOutcome};
use super::spec::{EdgeSide, ExperimentKind, ExperimentSpec};
use crate::error::{Error, Result};
use crate::fluctuation::{zeta0_continued, zeta_tilde};
use crate::freeconv::{residual, EdgeBehaviour, FreeConvolution, SpectralPoint};
use crate::measure::Measure;
use crate::rmt::{
    counting, delocalization_stat, empirical_stieltjes, green_entries, EnsembleConfig, EntryLaw, MatrixKind,
    SpectralData,
};
use rayon::prelude::*;
use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::Instant;

/// Execution options that do not change the results.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; `None` reads `DEFSC_THREADS`, then falls back to all cores.
    pub threads: Option<usize>,
    /// Replaces the spec's seed.
    pub seed: Option<u64>,
}

/// Resolves the worker count from the option, then `DEFSC_THREADS`.
pub fn resolve_threads(opt: Option<usize>) -> Result<usize> {
    if let Some(k) = opt {
        return if k == 0 { Err(Error::Config("--threads must be at least 1".into())) } else { Ok(k) };
    }
    match std::env::var("DEFSC_THREADS") {
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(k) if k > 0 => Ok(k),
            _ => Err(Error::Config(format!("DEFSC_THREADS must be a positive integer, got {s:?}"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct SpectrumKey {
    n: usize,
    lambda: u64,
    mu: String,
    kind: MatrixKind,
    law: EntryLaw,
    seed: u64,
    trial: u64,
}

/// Solutions and eigenvalue-only spectra shared between runs.
///
/// Spectra with eigenvectors are never stored.
#[derive(Debug, Default)]
pub struct RunCache {
    solutions: Mutex<HashMap<(String, u64), Arc<FreeConvolution>>>,
    spectra: Mutex<HashMap<SpectrumKey, Arc<SpectralData>>>,
}

impl RunCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// The shared solution for `(μ, λ)`.
    pub fn solution(&self, mu: &Measure, lambda: f64) -> Result<Arc<FreeConvolution>> {
        let key = (mu.to_json(), lambda.to_bits());
        if let Some(s) = self.solutions.lock().expect("cache lock").get(&key) {
            return Ok(s.clone());
        }
        let s = Arc::new(FreeConvolution::new(mu.clone(), lambda)?);
        Ok(self.solutions.lock().expect("cache lock").entry(key).or_insert(s).clone())
    }

    /// Samples (or recalls) one spectrum.
    pub fn spectrum(&self, cfg: &EnsembleConfig, want_vectors: bool) -> Result<Arc<SpectralData>> {
        if want_vectors {
            return Ok(Arc::new(cfg.spectrum(true)?));
        }
        let key = SpectrumKey {
            n: cfg.n_size,
            lambda: cfg.lambda.to_bits(),
            mu: cfg.mu.to_json(),
            kind: cfg.kind,
            law: cfg.entry_law,
            seed: cfg.seed,
            trial: cfg.trial_index,
        };
        if let Some(d) = self.spectra.lock().expect("cache lock").get(&key) {
            return Ok(d.clone());
        }
        let d = Arc::new(cfg.spectrum(false)?);
        Ok(self.spectra.lock().expect("cache lock").entry(key).or_insert(d).clone())
    }

    pub fn spectra_len(&self) -> usize {
        self.spectra.lock().expect("cache lock").len()
    }
}

/// Per-`(N, λ)` inputs shared by all trials.
struct Cell {
    n: usize,
    lambda: f64,
    sol: Arc<FreeConvolution>,
    points: Vec<SpectralPoint>,
    gammas: Option<Vec<f64>>,
}

/// Runs `spec` with a private cache.
pub fn run_experiment(spec: &ExperimentSpec, opts: &RunOptions) -> Result<Report> {
    run_experiment_cached(spec, opts, &RunCache::new())
}

/// Runs `spec`, sharing solutions and spectra through `cache`.
///
/// Configuration problems are returned as errors; numerical failures inside
/// a trial are recorded as failed rows.
pub fn run_experiment_cached(spec: &ExperimentSpec, opts: &RunOptions, cache: &RunCache) -> Result<Report> {
    spec.validate()?;
    let start = Instant::now();
    let threads = resolve_threads(opts.threads)?;
    let seed = opts.seed.unwrap_or(spec.ensemble.seed);
    let cal = Calibration { c_cal: spec.tolerance("c_cal"), log_power: spec.tolerance("log_power") };
    let mut flags = Vec::new();

    let mut cells = Vec::new();
    for &n in &spec.ensemble.n {
        for &lambda in &spec.ensemble.lambda {
            let sol = cache.solution(&spec.ensemble.mu, lambda).map_err(|e| Error::Config(e.to_string()))?;
            if sol.near_threshold() {
                flags.push(format!("lambda = {lambda} is close to an edge threshold"));
            }
            let points = if uses_grid(spec.kind) { spec.z_grid.resolve(n, &sol)? } else { Vec::new() };
            for p in &points {
                if p.eta < 1.0 / (3.0 * n as f64) || p.eta > 3.0 {
                    flags.push(format!("eta = {} outside [1/(3N), 3] for N = {n}", p.eta));
                }
            }
            let gammas = match spec.kind {
                ExperimentKind::Rigidity => Some(sol.classical_locations(n)?),
                _ => None,
            };
            cells.push(Cell { n, lambda, sol, points, gammas });
        }
    }
    flags.dedup();

    let trials = if spec.kind.samples() { spec.trials as u64 } else { 1 };
    let jobs: Vec<(usize, u64)> = (0..cells.len()).flat_map(|c| (0..trials).map(move |t| (c, t))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let per_job: Vec<Vec<Row>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(c, t)| run_trial(spec, &cells[c], t, seed, &cal, cache))
            .collect()
    });
    let rows: Vec<Row> = per_job.into_iter().flatten().collect();
    let aggregates = aggregate(&rows, &spec.quantiles);
    let mut report = Report {
        spec: spec.clone(),
        rows,
        aggregates,
        rules: Vec::new(),
        flags,
        provenance: Provenance {
            seed,
            threads,
            wall_clock_seconds: start.elapsed().as_secs_f64(),
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
        },
    };
    report.rules = evaluate_rules(&report);
    Ok(report)
}

fn uses_grid(kind: ExperimentKind) -> bool {
    matches!(
        kind,
        ExperimentKind::LocalLaw
            | ExperimentKind::OffDiagonalLaw
            | ExperimentKind::ZetaDecomposition
            | ExperimentKind::FreeConvOnly
            | ExperimentKind::IntegratedDos
    )
}

fn evaluate_rules(report: &Report) -> Vec<RuleOutcome> {
    let spec = &report.spec;
    let min_success = spec.tolerance("min_row_success");
    let frac = report.success_fraction();
    let mut rules = vec![RuleOutcome {
        name: "row_success".into(),
        passed: frac >= min_success,
        detail: format!("{frac:.4} of {} rows succeeded (need {min_success})", report.rows.len()),
    }];
    let limit = spec.tolerance("max_ratio_q95");
    let band = spec.tolerance("edge_band");
    for a in &report.aggregates {
        let (passed, detail) = match (spec.kind, a.ratio_q95, a.ratio_max) {
            (_, None, _) | (_, _, None) => continue,
            (ExperimentKind::FreeConvOnly, _, Some(max)) => (max <= 1.0, format!("max residual ratio {max:.3e}")),
            (ExperimentKind::EdgeExponent, _, Some(max)) => {
                ((max - 1.0).abs() <= band, format!("slope / expected = {max:.4}"))
            }
            (_, Some(q95), _) => (q95 <= limit, format!("q95 ratio {q95:.4} (limit {limit})")),
        };
        let at = match a.point {
            Some(p) => format!("[{p}]"),
            None => String::new(),
        };
        rules.push(RuleOutcome {
            name: format!("envelope {} N={} lambda={}{at}", a.statistic, a.n, a.lambda),
            passed,
            detail,
        });
    }
    rules
}

fn run_trial(spec: &ExperimentSpec, cell: &Cell, trial: u64, seed: u64, cal: &Calibration, cache: &RunCache) -> Vec<Row> {
    let base = |stat: &str| Row::new(spec.kind, cell.n, cell.lambda, trial, seed, stat);
    if !spec.kind.samples() {
        return analytic_rows(spec, cell, trial, seed);
    }
    let cfg = EnsembleConfig {
        n_size: cell.n,
        lambda: cell.lambda,
        mu: spec.ensemble.mu.clone(),
        kind: spec.ensemble.matrix_kind,
        entry_law: spec.ensemble.entry_law,
        seed,
        trial_index: trial,
    };
    let data = match cache.spectrum(&cfg, spec.kind.needs_vectors()) {
        Ok(d) => d,
        Err(e) => return vec![base("sample").failed(&e)],
    };
    let sol = &*cell.sol;
    let n = cell.n;
    let lambda = cell.lambda;
    let bp = BoundParams { n, lambda, ..Default::default() };
    let mut rows = Vec::new();
    match spec.kind {
        ExperimentKind::LocalLaw => {
            for (k, &p) in cell.points.iter().enumerate() {
                let row = at_point(base("abs_m_minus_mfc"), k, p);
                rows.push(match sol.m_fc(p) {
                    Ok(m) => {
                        let v = (empirical_stieltjes(&data, p) - m).norm();
                        let b = predicted_bound(spec.kind, &BoundParams { kappa: sol.kappa(p.e), eta: p.eta, ..bp }, cal);
                        row.with_value(v, b.ok())
                    }
                    Err(e) => row.failed(&e),
                });
            }
        }
        ExperimentKind::OffDiagonalLaw => {
            let k = spec.params.offdiag_indices.min(n);
            let pairs: Vec<(usize, usize)> = (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j))).collect();
            for (idx, &p) in cell.points.iter().enumerate() {
                let row = at_point(base("max_offdiag_g"), idx, p);
                let out = sol.m_fc(p).and_then(|m| {
                    let g = green_entries(&data, p, &pairs)?;
                    let v = g.iter().map(|x| x.norm()).fold(0.0, f64::max);
                    let b = predicted_bound(spec.kind, &BoundParams { eta: p.eta, im_mfc: m.im, ..bp }, cal)?;
                    Ok((v, b))
                });
                rows.push(match out {
                    Ok((v, b)) => row.with_value(v, Some(b)),
                    Err(e) => row.failed(&e),
                });
            }
        }
        ExperimentKind::Delocalization => {
            let row = base("sqrt_n_max_component");
            rows.push(match delocalization_stat(&data) {
                Ok(v) => row.with_value((n as f64).sqrt() * v, predicted_bound(spec.kind, &bp, cal).ok()),
                Err(e) => row.failed(&e),
            });
        }
        ExperimentKind::Rigidity => {
            let gammas = cell.gammas.as_ref().expect("classical locations computed");
            let (lo, hi) = bulk_range(n, spec.params.bulk_fraction);
            let mut devs: Vec<f64> = (lo..hi).map(|a| (data.eigenvalues[a] - gammas[a]).abs()).collect();
            let mut worst: f64 = 0.0;
            let mut worst_err = None;
            for a in 0..n {
                let alpha = a + 1;
                let hat = alpha.min(n - alpha).max(1);
                match predicted_bound(spec.kind, &BoundParams { alpha_index: hat, ..bp }, cal) {
                    Ok(b) => worst = worst.max((data.eigenvalues[a] - gammas[a]).abs() / b),
                    Err(e) => worst_err = Some(e),
                }
            }
            let mid = BoundParams { alpha_index: (n / 2).max(1), ..bp };
            let row = base("median_bulk_deviation");
            rows.push(if devs.is_empty() {
                row.failed(&Error::InvalidArgument("empty bulk index range".into()))
            } else {
                devs.sort_by(f64::total_cmp);
                row.with_value(super::report::quantile_sorted(&devs, 0.5), predicted_bound(spec.kind, &mid, cal).ok())
            });
            let row = base("max_deviation_ratio");
            rows.push(match worst_err {
                Some(e) => row.failed(&e),
                None => row.with_value(worst, Some(1.0)),
            });
        }
        ExperimentKind::DensityOfStates => {
            let width = sol.l2() - sol.l1();
            let mut idx = 0;
            for &c in &spec.params.window_centers {
                for &w in &spec.params.window_widths {
                    let center = sol.l1() + c * width;
                    let (e1, e2) = (center - 0.5 * w, center + 0.5 * w);
                    let mut row = base("abs_counting_error");
                    row.point = Some(idx);
                    row.e = Some(center);
                    row.width = Some(w);
                    idx += 1;
                    let out = (|| {
                        let emp = counting(&data, e1, e2)?;
                        let pred = sol.n_fc(e2)? - sol.n_fc(e1)?;
                        let kappa = if e1 >= sol.l1() && e2 <= sol.l2() { sol.kappa(e1).min(sol.kappa(e2)) } else { 0.0 };
                        let b = predicted_bound(spec.kind, &BoundParams { kappa, e1, e2, ..bp }, cal)?;
                        Ok::<_, Error>(((emp - pred).abs(), b))
                    })();
                    rows.push(match out {
                        Ok((v, b)) => row.with_value(v, Some(b)),
                        Err(e) => row.failed(&e),
                    });
                }
            }
        }
        ExperimentKind::Spacing => {
            let b = predicted_bound(spec.kind, &bp, cal).ok();
            for (i, j) in spacing_pairs(n, &spec.params) {
                let mut row = base("spacing_error");
                row.i = Some(i);
                row.j = Some(j);
                row.e = Some(data.eigenvalues[i]);
                let out = sol.density_fc(data.eigenvalues[i]).and_then(|rho| {
                    if rho <= 0.0 {
                        return Err(Error::InvalidArgument(format!("zero density at {}", data.eigenvalues[i])));
                    }
                    let gap = (data.eigenvalues[j] - data.eigenvalues[i]).abs();
                    Ok((gap - (j - i) as f64 / (n as f64 * rho)).abs())
                });
                rows.push(match out {
                    Ok(v) => row.with_value(v, b),
                    Err(e) => row.failed(&e),
                });
            }
        }
        ExperimentKind::IntegratedDos => {
            let mut seen = Vec::new();
            for p in &cell.points {
                if seen.contains(&p.e.to_bits()) {
                    continue;
                }
                seen.push(p.e.to_bits());
                let mut row = base("abs_idos_error");
                row.point = Some(seen.len() - 1);
                row.e = Some(p.e);
                let emp = data.eigenvalues.partition_point(|&x| x <= p.e) as f64 / n as f64;
                let kappa = if p.e >= sol.l1() && p.e <= sol.l2() { sol.kappa(p.e) } else { 0.0 };
                let out = sol.n_fc(p.e).and_then(|pred| {
                    Ok(((emp - pred).abs(), predicted_bound(spec.kind, &BoundParams { kappa, ..bp }, cal)?))
                });
                rows.push(match out {
                    Ok((v, b)) => row.with_value(v, Some(b)),
                    Err(e) => row.failed(&e),
                });
            }
        }
        ExperimentKind::OperatorNorm => {
            let env = predicted_bound(spec.kind, &bp, cal).ok();
            let top = *data.eigenvalues.last().expect("nonempty spectrum");
            rows.push(base("max_eigenvalue").with_value(top, env.map(|b| sol.l2() + b)));
            rows.push(base("upper_excess").with_value(top - sol.l2(), env));
            let bottom = data.eigenvalues[0];
            rows.push(base("lower_excess").with_value(sol.l1() - bottom, env));
        }
        ExperimentKind::ZetaDecomposition => {
            for (k, &p) in cell.points.iter().enumerate() {
                let out = (|| {
                    let diff = empirical_stieltjes(&data, p) - sol.m_fc(p)?;
                    let (z0, _) = zeta0_continued(&data.potential, sol, p)?;
                    let zt = zeta_tilde(&data.potential, sol, p)?;
                    Ok::<_, Error>((diff.norm(), (diff - z0).norm(), (z0 - zt).norm(), z0.norm()))
                })();
                let bound_raw = predicted_bound(
                    ExperimentKind::LocalLaw,
                    &BoundParams { kappa: sol.kappa(p.e), eta: p.eta, ..bp },
                    cal,
                )
                .ok();
                let bound_corr = predicted_bound(spec.kind, &BoundParams { eta: p.eta, ..bp }, cal).ok();
                let plain = 1.0 / (n as f64 * p.eta);
                let zeta_rate = cal.factor(n) * lambda / ((sol.kappa(p.e) + p.eta).sqrt() * (n as f64).sqrt());
                let names = ["raw", "corrected", "zeta_gap", "abs_zeta0"];
                let bounds = [bound_raw, bound_corr, Some(plain), (lambda > 0.0).then_some(zeta_rate)];
                match out {
                    Ok((raw, corr, gap, z)) => {
                        for ((name, b), v) in names.iter().zip(bounds).zip([raw, corr, gap, z]) {
                            rows.push(at_point(base(name), k, p).with_value(v, b));
                        }
                    }
                    Err(e) => {
                        for name in names {
                            rows.push(at_point(base(name), k, p).failed(&e));
                        }
                    }
                }
            }
        }
        ExperimentKind::EdgeExponent | ExperimentKind::FreeConvOnly => unreachable!(),
    }
    rows
}

fn at_point(mut row: Row, k: usize, p: SpectralPoint) -> Row {
    row.point = Some(k);
    row.e = Some(p.e);
    row.eta = Some(p.eta);
    row
}

/// Zero-based index range of the centred bulk.
pub(crate) fn bulk_range(n: usize, fraction: f64) -> (usize, usize) {
    let margin = ((1.0 - fraction) * 0.5 * n as f64).floor() as usize;
    (margin, n - margin)
}

/// Deterministic bulk index pairs `(i, j)`, `i < j`, with `spacing_min ≤ j − i ≤ spacing_max`.
pub(crate) fn spacing_pairs(n: usize, params: &super::spec::KindParams) -> Vec<(usize, usize)> {
    let dmax = params.spacing_max.unwrap_or((n as f64).sqrt().floor() as usize);
    let dmin = params.spacing_min.max(1);
    let (lo, hi) = bulk_range(n, params.bulk_fraction);
    if dmin > dmax || hi <= lo + dmin || params.spacing_pairs == 0 {
        return Vec::new();
    }
    let span = dmax - dmin + 1;
    let count = params.spacing_pairs;
    (0..count)
        .filter_map(|p| {
            let d = dmin + p % span;
            if lo + d >= hi {
                return None;
            }
            let room = hi - d - lo;
            let i = lo + (p * room) / count;
            Some((i, i + d))
        })
        .collect()
}

fn analytic_rows(spec: &ExperimentSpec, cell: &Cell, trial: u64, seed: u64) -> Vec<Row> {
    let base = |stat: &str| Row::new(spec.kind, cell.n, cell.lambda, trial, seed, stat);
    let sol = &*cell.sol;
    let mut rows = Vec::new();
    match spec.kind {
        ExperimentKind::FreeConvOnly => {
            let tol = spec.tolerance("residual");
            for (k, &p) in cell.points.iter().enumerate() {
                let row = at_point(base("residual"), k, p);
                let out = sol
                    .m_fc(p)
                    .and_then(|m| residual(sol.measure(), sol.lambda(), p.z(), m));
                rows.push(match out {
                    Ok(r) => row.with_value(r, Some(tol)),
                    Err(e) => row.failed(&e),
                });
            }
            rows.push(base("l1").with_value(sol.l1(), None));
            rows.push(base("l2").with_value(sol.l2(), None));
        }
        ExperimentKind::EdgeExponent => {
            let p = &spec.params;
            let sides: &[bool] = match p.edge {
                EdgeSide::Upper => &[true],
                EdgeSide::Lower => &[false],
                EdgeSide::Both => &[false, true],
            };
            for &upper in sides {
                let name = if upper { "upper_slope" } else { "lower_slope" };
                let edge = if upper { sol.support().upper } else { sol.support().lower };
                let expected = match edge.behaviour {
                    EdgeBehaviour::SquareRoot => 0.5,
                    EdgeBehaviour::Power { exponent } => exponent,
                };
                let row = base(name);
                rows.push(match sol.edge_exponent_fit(upper, p.kappa_min, p.kappa_max, p.kappa_points) {
                    Ok(fit) => row.with_value(fit.slope, Some(expected)),
                    Err(e) => row.failed(&e),
                });
            }
            rows.push(base("l2").with_value(sol.l2(), None));
        }
        _ => unreachable!(),
    }
    rows
}
