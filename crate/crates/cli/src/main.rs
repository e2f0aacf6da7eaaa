//! `otsd` command line: solve, check, structural-risk and bench.

mod bench;
mod check;
mod run;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use otsd::case_io::{write_result, OutputFormat, ResultDocument};
use otsd::dc;
use otsd::grid::{ContingencySet, ProbabilityConvention};

use run::{Algorithm, RunConfig};

#[derive(Parser)]
#[command(name = "otsd", version, about = "Transmission switching with de-energization under N-1 security")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one case and write a result document.
    Solve(SolveArgs),
    /// Run the N-1 security analysis of one configuration.
    Check(CheckArgs),
    /// Print the structural risk of the all-closed grid.
    StructuralRisk(CaseArgs),
    /// Run a manifest of (case, tlf, algo) rows and print a CSV table.
    Bench(BenchArgs),
}

#[derive(Args, Clone)]
struct CaseArgs {
    /// Case file path, or a short name such as `case30` looked up in the data directory.
    #[arg(long)]
    case: String,
    /// Thermal limit factor as a fraction (1.2 = 120%).
    #[arg(long, default_value_t = 1.0)]
    tlf: f64,
    #[arg(long, env = "OTSD_DATA_DIR", default_value = "data")]
    data_dir: PathBuf,
    /// Contingency probability convention.
    #[arg(long, value_enum, default_value_t = Prob::Unit)]
    prob: Prob,
}

#[derive(Args, Clone)]
struct SolverArgs {
    /// Initial hop radius.
    #[arg(long = "nh0", default_value_t = 1)]
    nh_0: usize,
    /// Maximum hop radius.
    #[arg(long, default_value_t = 4)]
    nh_max: usize,
    /// Overload tolerance in per unit.
    #[arg(long, default_value_t = dc::DEFAULT_TOLERANCE)]
    tolerance: f64,
    /// Overall time limit in seconds.
    #[arg(long, value_parser = run::seconds)]
    time_limit: Option<Duration>,
    /// Time limit in seconds for each MILP solved by the heuristic; 0 disables it.
    #[arg(long, default_value_t = 5.0)]
    solve_time_limit: f64,
    /// Upper bound on the number of openings (extensive only).
    #[arg(long)]
    max_openings: Option<usize>,
    /// Relative MIP gap.
    #[arg(long, default_value_t = 1e-6)]
    mip_gap: f64,
    /// Backend random seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    case: CaseArgs,
    #[arg(long, default_value = "heuristic", value_parser = parse_algo)]
    algo: Algorithm,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write the document here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Zero all timing fields so documents compare byte for byte.
    #[arg(long)]
    no_timings: bool,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    case: CaseArgs,
    /// Comma-separated branch indices to open.
    #[arg(long, default_value = "")]
    open: String,
    #[arg(long, default_value_t = dc::DEFAULT_TOLERANCE)]
    tolerance: f64,
}

#[derive(Args)]
struct BenchArgs {
    /// CSV with header `case,tlf[,algo]`.
    #[arg(long)]
    manifest: PathBuf,
    /// Rows run concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, env = "OTSD_DATA_DIR", default_value = "data")]
    data_dir: PathBuf,
    #[arg(long, value_enum, default_value_t = Prob::Unit)]
    prob: Prob,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Prob {
    Unit,
    Uniform,
}

impl From<Prob> for ProbabilityConvention {
    fn from(p: Prob) -> Self {
        match p {
            Prob::Unit => ProbabilityConvention::Unit,
            Prob::Uniform => ProbabilityConvention::Uniform,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

fn parse_algo(s: &str) -> Result<Algorithm, String> {
    s.parse()
}

fn run_config(case: PathBuf, tlf: f64, algorithm: Algorithm, prob: Prob, s: &SolverArgs) -> Result<RunConfig> {
    if !(s.solve_time_limit.is_finite() && s.solve_time_limit >= 0.0) {
        anyhow::bail!("--solve-time-limit must be non-negative");
    }
    let cfg = RunConfig {
        case,
        tlf,
        algorithm,
        nh_0: s.nh_0,
        nh_max: s.nh_max,
        tolerance: s.tolerance,
        probability: prob.into(),
        time_limit: s.time_limit,
        solve_time_limit: (s.solve_time_limit > 0.0).then(|| Duration::from_secs_f64(s.solve_time_limit)),
        max_openings: s.max_openings,
        mip_gap: s.mip_gap,
        seed: s.seed,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn cmd_solve(a: SolveArgs) -> Result<i32> {
    let path = run::resolve_case(&a.case.case, &a.case.data_dir)?;
    let cfg = run_config(path, a.case.tlf, a.algo, a.case.prob, &a.solver)?;
    let out = run::execute(&cfg)?;
    let mut doc = ResultDocument::from_result(
        &out.grid,
        cfg.tlf,
        cfg.algorithm.as_str(),
        &out.result,
        Some(out.structural_risk),
    );
    if a.no_timings {
        doc.time_ms = 0.0;
        doc.timings_ms.clear();
    }
    let format = match a.format {
        Format::Json => OutputFormat::Json,
        Format::Csv => OutputFormat::CsvSummary,
    };
    emit(a.output.as_deref(), &write_result(&doc, format))?;
    Ok(out.result.status.exit_code())
}

fn cmd_check(a: CheckArgs) -> Result<i32> {
    let path = run::resolve_case(&a.case.case, &a.case.data_dir)?;
    let grid = run::load_grid(&path, a.case.tlf)?;
    let cs = ContingencySet::n_minus_1(&grid, a.case.prob.into());
    let open = check::parse_openings(&a.open, &grid)?;
    emit(None, &check::check(&grid, &cs, &open, a.tolerance)?)?;
    Ok(0)
}

fn cmd_structural_risk(a: CaseArgs) -> Result<i32> {
    let path = run::resolve_case(&a.case, &a.data_dir)?;
    let grid = run::load_grid(&path, a.tlf)?;
    let cs = ContingencySet::n_minus_1(&grid, a.prob.into());
    emit(None, &format!("{:.6}\n", dc::structural_risk(&grid, &cs)))?;
    Ok(0)
}

fn cmd_bench(a: BenchArgs) -> Result<i32> {
    // Case and algorithm are filled in per row.
    let template = run_config(PathBuf::new(), 1.0, Algorithm::Heuristic, a.prob, &a.solver)?;
    let rows = bench::read_manifest(&a.manifest)?;
    let table = bench::run_manifest(&rows, &template, &a.data_dir, a.jobs);
    let mut buf = Vec::new();
    bench::write_table(&table, &mut buf)?;
    emit(a.output.as_deref(), std::str::from_utf8(&buf)?)?;
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let res = match cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Check(a) => cmd_check(a),
        Command::StructuralRisk(a) => cmd_structural_risk(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match res {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
