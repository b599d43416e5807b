//! `gp-sinkhorn` command-line tool.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 usage or invalid input,
//! 3 numerical or convergence failure, 4 bound violation under `--strict`.

mod config;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use gp_sinkhorn::bounds::{bound_table, BoundQuery};
use gp_sinkhorn::divergence::{gp_divergence, DivergenceKind, GaussianProcess, RegParam};
use gp_sinkhorn::experiments::{
    check_bound_dominance, emit_csv, emit_summary_csv, emit_svg, run_convergence,
    run_dimension_scan, summarize, DominanceReport, Metric, PlotOptions, XAxis,
};
use gp_sinkhorn::kernels::{Kernel, MeanFunction};
use gp_sinkhorn::oracle::{compare_closed_form, DEFAULT_MAX_ITER, DEFAULT_TOL};
use gp_sinkhorn::sampling::{sample_uniform, IndexSample};

use crate::config::ExperimentArgs;
use crate::report::{Format, Report};

#[derive(Parser)]
#[command(
    name = "gp-sinkhorn",
    version,
    about = "Entropic OT and Sinkhorn divergences between Gaussian processes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Divergence between two Gaussian processes from sampled marginals.
    Divergence(DivergenceArgs),
    /// Expected and high-probability error bounds.
    Bounds(BoundsArgs),
    /// Closed form against a discrete Sinkhorn-Knopp solve for 1-D Gaussians.
    Oracle(OracleArgs),
    /// Estimation error as the number of marginals grows.
    Converge(ExperimentArgs),
    /// Estimation error across input dimensions.
    Dimscan(ExperimentArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    EntropicW2,
    Sinkhorn,
}

impl From<KindArg> for DivergenceKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::EntropicW2 => DivergenceKind::EntropicW2,
            KindArg::Sinkhorn => DivergenceKind::Sinkhorn,
        }
    }
}

pub(crate) fn positive(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("expected a positive number, got {s}"))
    }
}

fn nonnegative(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("expected a nonnegative number, got {s}"))
    }
}

#[derive(Args)]
struct DivergenceArgs {
    #[arg(long, default_value = "rbf:variance=1,lengthscale=1")]
    k0: String,
    #[arg(long, default_value = "rbf:variance=1,lengthscale=1")]
    k1: String,
    /// Mean of the first process: `zero`, `const:<c>` or `coord:<i>`.
    #[arg(long, default_value = "zero")]
    m0: String,
    #[arg(long, default_value = "zero")]
    m1: String,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    dim: u64,
    /// Number of uniformly sampled marginals (default 100 without --sample-file).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    n: Option<u64>,
    #[arg(long, value_parser = positive)]
    eps: f64,
    #[arg(long, value_enum, default_value = "entropic-w2")]
    kind: KindArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Read index points from a file, one point per line.
    #[arg(long)]
    sample_file: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long, value_parser = nonnegative)]
    kappa0: f64,
    #[arg(long, value_parser = nonnegative)]
    kappa1: f64,
    #[arg(long, value_parser = positive)]
    eps: f64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    n: u64,
    #[arg(long, default_value_t = 1.0, value_parser = positive)]
    theta: f64,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, value_parser = positive)]
    var0: f64,
    #[arg(long, value_parser = positive)]
    var1: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    mu0: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    mu1: f64,
    #[arg(long, value_parser = positive)]
    eps: f64,
    /// Grid points spanning six standard deviations either side.
    #[arg(long, default_value_t = 401)]
    grid: usize,
    #[arg(long, default_value_t = DEFAULT_TOL, value_parser = positive)]
    tol: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    max_iter: usize,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
}

fn parse_mean(spec: &str, dim: usize) -> anyhow::Result<MeanFunction> {
    let spec = spec.trim();
    if spec == "zero" {
        return Ok(MeanFunction::Zero);
    }
    if let Some(c) = spec.strip_prefix("const:") {
        let c: f64 = c
            .trim()
            .parse()
            .with_context(|| format!("mean constant {c:?}"))?;
        return Ok(MeanFunction::Constant(c));
    }
    if let Some(i) = spec.strip_prefix("coord:") {
        let i: usize = i
            .trim()
            .parse()
            .with_context(|| format!("mean coordinate {i:?}"))?;
        if i >= dim {
            bail!(gp_sinkhorn::Error::InvalidInput(format!(
                "coordinate {i} out of range for dim {dim}"
            )));
        }
        return Ok(MeanFunction::custom(move |x| x[i]));
    }
    bail!(gp_sinkhorn::Error::InvalidInput(format!(
        "unknown mean function {spec:?}"
    )))
}

fn cmd_divergence(args: DivergenceArgs) -> anyhow::Result<()> {
    let dim = args.dim as usize;
    let sample = match &args.sample_file {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            let sample: IndexSample = text.parse()?;
            if sample.dim() != dim {
                bail!(gp_sinkhorn::Error::DimensionMismatch {
                    expected: dim,
                    got: sample.dim()
                });
            }
            if let Some(n) = args.n {
                if n as usize != sample.len() {
                    bail!(gp_sinkhorn::Error::InvalidInput(format!(
                        "--n {n} but the sample file has {} points",
                        sample.len()
                    )));
                }
            }
            sample
        }
        None => sample_uniform(args.n.unwrap_or(100) as usize, dim, args.seed)?,
    };
    let gp0 = GaussianProcess::new(parse_mean(&args.m0, dim)?, Kernel::parse(&args.k0, dim)?);
    let gp1 = GaussianProcess::new(parse_mean(&args.m1, dim)?, Kernel::parse(&args.k1, dim)?);
    let result = gp_divergence(
        &gp0,
        &gp1,
        &sample,
        RegParam::new(args.eps)?,
        args.kind.into(),
    )?;
    Report::from_serialize(&result)?.print(args.format)
}

fn cmd_bounds(args: BoundsArgs) -> anyhow::Result<()> {
    let q =
        BoundQuery::new(args.kappa0, args.kappa1, args.eps, args.n as usize).with_theta(args.theta);
    let table = bound_table(&q)?;
    Report::from_serialize(&table)?.print(args.format)
}

fn cmd_oracle(args: OracleArgs) -> anyhow::Result<()> {
    let c = compare_closed_form(
        (args.mu0, args.var0),
        (args.mu1, args.var1),
        args.eps,
        args.grid,
        args.tol,
        args.max_iter,
    )?;
    Report::from_serialize(&c)?.print(args.format)
}

#[derive(Clone, Copy)]
enum Experiment {
    Convergence,
    DimensionScan,
}

fn cmd_experiment(args: ExperimentArgs, which: Experiment) -> anyhow::Result<ExitCode> {
    if let Some(threads) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let (stem, x_axis, label) = match which {
        Experiment::Convergence => ("converge", XAxis::Marginals, "marginals n"),
        Experiment::DimensionScan => ("dimscan", XAxis::Dimension, "dimension d"),
    };
    let cfg = args.resolve(matches!(which, Experiment::DimensionScan))?;
    let records = match which {
        Experiment::Convergence => run_convergence(&cfg)?,
        Experiment::DimensionScan => run_dimension_scan(&cfg)?,
    };
    let rows = summarize(&records)?;
    let out_dir = &args.out_dir;
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let path = |suffix: &str| -> PathBuf { out_dir.join(format!("{stem}_{suffix}")) };
    let records_path = path("records.csv");
    let summary_path = path("summary.csv");
    let abs_path = path("abs.svg");
    let rel_path = path("rel.svg");
    emit_csv(&records, &records_path)?;
    emit_summary_csv(&rows, &summary_path)?;
    for (p, metric, what) in [
        (&abs_path, Metric::Absolute, "absolute error"),
        (&rel_path, Metric::Relative, "relative error"),
    ] {
        let opts = PlotOptions {
            x_axis,
            metric,
            title: format!("{what} vs {label}"),
        };
        emit_svg(&rows, p, &opts)?;
    }
    for p in [&records_path, &summary_path, &abs_path, &rel_path] {
        println!("{}", display(p));
    }
    let report = check_bound_dominance(&cfg, &rows)?;
    for v in &report.excused {
        eprintln!(
            "note: d={} eps={} n={} mean abs error {:.6e} exceeds bound {:.6e}, within reference error {:.6e}",
            v.d, v.epsilon, v.n, v.mean_abs, v.expected_bound, v.ground_truth_error
        );
    }
    for v in &report.violations {
        eprintln!(
            "bound violation: d={} eps={} n={} mean abs error {:.6e} > bound {:.6e}",
            v.d, v.epsilon, v.n, v.mean_abs, v.expected_bound
        );
    }
    Ok(ExitCode::from(strict_status(args.strict, &report)))
}

fn strict_status(strict: bool, report: &DominanceReport) -> u8 {
    if strict && !report.holds() {
        4
    } else {
        0
    }
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    use gp_sinkhorn::Error as E;
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::InvalidInput(_) | E::DimensionMismatch { .. } => 2,
                E::NumericalDomain(_) | E::NotConverged { .. } => 3,
                E::Io(_) | E::Csv(_) => 1,
            };
        }
        if cause.downcast_ref::<serde_json::Error>().is_some() {
            return 2;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Divergence(a) => cmd_divergence(a).map(|_| ExitCode::SUCCESS),
        Command::Bounds(a) => cmd_bounds(a).map(|_| ExitCode::SUCCESS),
        Command::Oracle(a) => cmd_oracle(a).map(|_| ExitCode::SUCCESS),
        Command::Converge(a) => cmd_experiment(a, Experiment::Convergence),
        Command::Dimscan(a) => cmd_experiment(a, Experiment::DimensionScan),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
