//! Declarative Monte Carlo experiments.
//!
//! An [`ExperimentSpec`] sweeps `N × λ`, runs independent trials in
//! parallel and turns each trial into [`Row`]s: a statistic, the predicted
//! envelope and their ratio. Rows are reduced in `(N, λ, trial)` order, so a
//! report is bit-for-bit identical for any worker count.
//!
//! ```
//! use defsc::harness::{run_experiment, ExperimentSpec, RunOptions};
//! let spec = ExperimentSpec::from_json(r#"{
//!     "kind": "LocalLaw",
//!     "ensemble": {"n": [50], "lambda": [0.5], "mu": {"kind": "jacobi", "alpha": 0, "beta": 0, "d": [1]}},
//!     "z_grid": {"points": [{"e": 0.0, "eta": 0.1}]}
//! }"#)?;
//! let report = run_experiment(&spec, &RunOptions { threads: Some(1), seed: Some(7) })?;
//! assert_eq!(report.rows.len(), 1);
//! assert_eq!(report.aggregates[0].median, report.rows[0].value);
//! # Ok::<(), defsc::Error>(())
//! ```

mod bounds;
mod report;
mod run;
mod spec;

pub use bounds::{predicted_bound, BoundParams, Calibration};
pub use report::{
    aggregate, emit_report, median, quantile, quantile_sorted, read_report, read_rows_csv, scaling_fit,
    write_rows_csv, Aggregate, Provenance, Report, ReportFormat, Row, RuleOutcome, ScalingAxis, AGGREGATES_FILE,
    MANIFEST_FILE, REPORT_FILE, ROWS_FILE,
};
pub use run::{resolve_threads, run_experiment, run_experiment_cached, RunCache, RunOptions};
pub use spec::{
    EdgeSide, EnsembleTemplate, EtaSpec, ExperimentKind, ExperimentSpec, KindParams, ZGrid, TOLERANCE_KEYS,
};

/// `(kind, result, envelope)` for every experiment kind.
pub fn list_kinds() -> Vec<(ExperimentKind, &'static str, &'static str)> {
    ExperimentKind::ALL
        .iter()
        .map(|&k| {
            let (result, envelope) = k.anchor();
            (k, result, envelope)
        })
        .collect()
}
