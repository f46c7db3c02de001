use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use kpair_core::driver::{factor_b, Analysis};
use kpair_core::lanczos::IntervalOptions;
use kpair_core::ldl::ShiftedFactorizer;
use kpair_core::sparse::read_matrix_market;
use kpair_core::{
    bisect_to_eigenvalue, dense_generalized_eigen, emit_report, find_initial_interval, solve_kth,
    BisectionTolerance, Pencil, ReportFormat, SolveStatus, SolverConfig,
};
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "kpair",
    version,
    about = "k-th eigenpair of sparse symmetric-definite pencils A x = λ B x"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the k-th smallest eigenpair with a validated index.
    Solve(SolveArgs),
    /// Count eigenvalues below each shift.
    Inertia(InertiaArgs),
    /// Find an interval containing the k-th eigenvalue.
    Interval(IntervalArgs),
    /// Plain bisection on inertia counts down to a tolerance.
    BisectOnly(BisectArgs),
    /// Dense reference eigenvalues (small problems only).
    Oracle(OracleArgs),
}

#[derive(Args)]
struct PencilArgs {
    /// Matrix Market file holding A.
    #[arg(long)]
    matrix_a: PathBuf,
    /// Matrix Market file holding B (symmetric positive definite).
    #[arg(long)]
    matrix_b: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    pencil: PencilArgs,
    /// 1-based index of the eigenvalue, counted from the smallest.
    #[arg(short)]
    k: usize,
    #[arg(long, default_value_t = 20)]
    m_max: usize,
    #[arg(long, default_value_t = 1e-10)]
    tau_res: f64,
    #[arg(long, default_value_t = 1e-10)]
    tau_diff: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    max_lanczos: usize,
    #[arg(long, default_value_t = 128)]
    max_bisect: usize,
    #[arg(long, default_value_t = 500)]
    max_si: usize,
    /// Cross-check the result with the dense solver.
    #[arg(long)]
    verify: bool,
    /// Record wall-clock timings (the report is then no longer reproducible).
    #[arg(long)]
    timings: bool,
    /// Write the JSON report here ("-" for stdout).
    #[arg(long)]
    json: Option<PathBuf>,
    /// Format of the summary printed to stdout.
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Args)]
struct InertiaArgs {
    #[command(flatten)]
    pencil: PencilArgs,
    #[arg(long, required = true, num_args = 1.., allow_negative_numbers = true)]
    sigma: Vec<f64>,
}

#[derive(Args)]
struct IntervalArgs {
    #[command(flatten)]
    pencil: PencilArgs,
    #[arg(short)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    max_lanczos: usize,
}

#[derive(Args)]
struct BisectArgs {
    #[command(flatten)]
    pencil: PencilArgs,
    #[arg(short)]
    k: usize,
    /// Stop when the interval is shorter than this.
    #[arg(long, conflicts_with = "tau_rel")]
    tau_abs: Option<f64>,
    /// Stop when the interval length relative to its endpoints is below this.
    #[arg(long)]
    tau_rel: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    max_iterations: usize,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    pencil: PencilArgs,
    /// Print only the k-th eigenvalue.
    #[arg(short)]
    k: Option<usize>,
}

fn load(args: &PencilArgs) -> Result<Pencil> {
    let read = |p: &Path| read_matrix_market(p).with_context(|| format!("reading {}", p.display()));
    let a = read(&args.matrix_a)?;
    let b = read(&args.matrix_b)?;
    Ok(Pencil::new(a, b)?)
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n {
        bail!("k = {k} is outside 1..={n}");
    }
    Ok(())
}

fn print_json(value: &serde_json::Value) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn solve(args: SolveArgs) -> Result<ExitCode> {
    let pencil = load(&args.pencil)?;
    let config = SolverConfig {
        k: args.k,
        m_max: args.m_max,
        tau_res: args.tau_res,
        tau_diff: args.tau_diff,
        seed: args.seed,
        max_lanczos: args.max_lanczos,
        max_bisect: args.max_bisect,
        max_si: args.max_si,
        verify: args.verify,
        record_timings: args.timings,
        ..SolverConfig::new(args.k)
    };
    let report = solve_kth(pencil.a(), pencil.b(), &config)?;
    match &args.json {
        Some(p) if p.as_os_str() == "-" => {
            emit_report(&report, ReportFormat::Json, io::stdout().lock())?
        }
        Some(p) => {
            let file = File::create(p).with_context(|| format!("creating {}", p.display()))?;
            let mut w = BufWriter::new(file);
            emit_report(&report, ReportFormat::Json, &mut w)?;
            w.flush()?;
        }
        None => {}
    }
    let stdout_is_json = args.json.as_ref().is_some_and(|p| p.as_os_str() == "-");
    if !stdout_is_json {
        let format = match args.format {
            Format::Text => ReportFormat::Text,
            Format::Json => ReportFormat::Json,
        };
        emit_report(&report, format, io::stdout().lock())?;
    }
    Ok(match report.status {
        SolveStatus::Converged => ExitCode::SUCCESS,
        SolveStatus::ClusterSuspected => ExitCode::from(2),
        SolveStatus::Failed => ExitCode::from(1),
    })
}

fn inertia(args: InertiaArgs) -> Result<ExitCode> {
    let pencil = load(&args.pencil)?;
    let analysis = Analysis::new(&pencil);
    let fx = ShiftedFactorizer::new(&pencil, &analysis.shifted)?;
    let mut rows = Vec::new();
    for &sigma in &args.sigma {
        let f = fx
            .factorize(sigma)
            .with_context(|| format!("factorizing A - {sigma} B"))?;
        let i = f.inertia();
        rows.push(
            json!({ "sigma": sigma, "below": i.negative, "zero": i.zero, "above": i.positive }),
        );
    }
    print_json(&json!(rows))?;
    Ok(ExitCode::SUCCESS)
}

fn interval(args: IntervalArgs) -> Result<ExitCode> {
    let pencil = load(&args.pencil)?;
    check_k(args.k, pencil.n())?;
    let analysis = Analysis::new(&pencil);
    let b_factor = factor_b(&analysis)?;
    let fx = ShiftedFactorizer::new(&pencil, &analysis.shifted)?;
    let options = IntervalOptions {
        seed: args.seed,
        max_iterations: args.max_lanczos,
        ..IntervalOptions::default()
    };
    let (interval, record) = find_initial_interval(&fx, &b_factor, args.k, &options)?;
    print_json(&json!({
        "k": args.k,
        "interval": interval,
        "length": interval.length(),
        "record": record,
        "factorizations": fx.count(),
    }))?;
    Ok(ExitCode::SUCCESS)
}

fn bisect_only(args: BisectArgs) -> Result<ExitCode> {
    let tolerance = match (args.tau_abs, args.tau_rel) {
        (_, Some(t)) => BisectionTolerance::Relative(t),
        (Some(t), None) => BisectionTolerance::Absolute(t),
        (None, None) => BisectionTolerance::Absolute(1e-10),
    };
    let pencil = load(&args.pencil)?;
    check_k(args.k, pencil.n())?;
    let analysis = Analysis::new(&pencil);
    let b_factor = factor_b(&analysis)?;
    let fx = ShiftedFactorizer::new(&pencil, &analysis.shifted)?;
    let options = IntervalOptions {
        seed: args.seed,
        ..IntervalOptions::default()
    };
    let (start, _) = find_initial_interval(&fx, &b_factor, args.k, &options)?;
    let (estimate, outcome) =
        match bisect_to_eigenvalue(&fx, start, args.k, tolerance, args.max_iterations) {
            Ok(v) => v,
            Err(e @ kpair_core::Error::MaxIterations { .. }) => {
                eprintln!("error: {e}");
                return Ok(ExitCode::from(2));
            }
            Err(e) => return Err(e.into()),
        };
    print_json(&json!({
        "k": args.k,
        "tolerance": tolerance,
        "lambda": estimate,
        "start": start,
        "interval": outcome.interval,
        "iterations": outcome.iterations(),
        "singular_stop": outcome.singular_stop,
        "trace": outcome.trace,
    }))?;
    Ok(ExitCode::SUCCESS)
}

fn oracle(args: OracleArgs) -> Result<ExitCode> {
    let pencil = load(&args.pencil)?;
    let spectrum = dense_generalized_eigen(pencil.a(), pencil.b())?;
    match args.k {
        Some(k) => {
            check_k(k, pencil.n())?;
            print_json(&json!({ "k": k, "lambda": spectrum.values[k - 1] }))?;
        }
        None => print_json(&json!({ "eigenvalues": spectrum.values }))?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => solve(a),
        Command::Inertia(a) => inertia(a),
        Command::Interval(a) => interval(a),
        Command::BisectOnly(a) => bisect_only(a),
        Command::Oracle(a) => oracle(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
