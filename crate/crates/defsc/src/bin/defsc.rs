use clap::{Parser, Subcommand};
use defsc::freeconv::FreeConvolution;
use defsc::harness::{
    emit_report, list_kinds, read_report, run_experiment, ExperimentSpec, ReportFormat, RunOptions, ZGrid,
};
use defsc::{Error, Measure, SpectralPoint};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Deformed semicircle law: free convolution solver and Monte Carlo harness.
#[derive(Parser)]
#[command(name = "defsc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for m_fc on a grid and export the solution.
    Fcsolve {
        /// Measure file, e.g. {"kind": "jacobi", "alpha": 0, "beta": 0, "d": [1]}.
        #[arg(long)]
        measure: PathBuf,
        #[arg(long)]
        lambda: f64,
        /// A list of {"e", "eta"} points or a z-grid descriptor.
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Dimension used to resolve N-dependent grid descriptors.
        #[arg(long, default_value_t = 1000)]
        n: usize,
    },
    /// Run an experiment spec and write its report.
    Run {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (overrides DEFSC_THREADS).
        #[arg(long)]
        threads: Option<usize>,
        /// Overrides the seed in the spec.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Enumerate experiment kinds with the result each one checks.
    ListKinds,
    /// Re-emit a stored report in another format.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: ReportFormat,
    },
}

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NoConvergence { .. }
        | Error::PoleOnSupport { .. }
        | Error::EigenFailure(_)
        | Error::NotHermitian { .. }
        | Error::EdgeDegeneracy { .. }
        | Error::BranchAmbiguity
        | Error::SingularResolvent
        | Error::DegenerateFit(_) => EXIT_NUMERICAL,
        _ => EXIT_CONFIG,
    }
}

fn read(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn parse_grid(text: &str, n: usize, sol: &FreeConvolution) -> Result<Vec<SpectralPoint>, Error> {
    if let Ok(points) = serde_json::from_str::<Vec<SpectralPoint>>(text) {
        return ZGrid::Points(points).resolve(n, sol);
    }
    let grid: ZGrid = serde_json::from_str(text)?;
    grid.resolve(n, sol)
}

fn fcsolve(measure: &Path, lambda: f64, grid: &Path, out: &Path, n: usize) -> Result<(), Error> {
    let mu = Measure::from_json(&read(measure)?).map_err(|e| Error::Config(e.to_string()))?;
    let sol = FreeConvolution::new(mu, lambda).map_err(|e| match e {
        Error::NegativeLambda(_) | Error::MultiIntervalUnsupported { .. } => Error::Config(e.to_string()),
        other => other,
    })?;
    let points = parse_grid(&read(grid)?, n, &sol)?;
    std::fs::write(out, sol.export_json(&points)?)?;
    println!(
        "L1 = {:.12} L2 = {:.12} edge class {:?}, {} points -> {}",
        sol.l1(),
        sol.l2(),
        sol.edge_class(),
        points.len(),
        out.display()
    );
    Ok(())
}

fn run(spec_path: &Path, out: &Path, threads: Option<usize>, seed: Option<u64>) -> Result<ExitCode, Error> {
    let spec = ExperimentSpec::from_json(&read(spec_path)?)?;
    let report = run_experiment(&spec, &RunOptions { threads, seed })?;
    emit_report(&report, out, ReportFormat::StructuredText)?;
    emit_report(&report, out, ReportFormat::Csv)?;
    for r in &report.rules {
        println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
    }
    for f in &report.flags {
        println!("flag: {f}");
    }
    let frac = report.success_fraction();
    if frac < spec.tolerance("min_row_success") {
        eprintln!("error: only {frac:.4} of rows succeeded");
        return Ok(ExitCode::from(EXIT_NUMERICAL));
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fcsolve { measure, lambda, grid, out, n } => {
            fcsolve(&measure, lambda, &grid, &out, n).map(|_| ExitCode::SUCCESS)
        }
        Command::Run { spec, out, threads, seed } => run(&spec, &out, threads, seed),
        Command::ListKinds => {
            for (kind, result, envelope) in list_kinds() {
                println!("{kind}\t{result}\t{envelope}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Report { input, format } => read_report(&input)
            .map_err(|e| Error::Config(format!("{}: {e}", input.display())))
            .and_then(|report| emit_report(&report, &input, format))
            .map(|files| {
                for f in files {
                    println!("{}", f.display());
                }
                ExitCode::SUCCESS
            }),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
