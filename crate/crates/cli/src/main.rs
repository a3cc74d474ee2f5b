use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{ArgGroup, Args, Parser, Subcommand};
use serde::Serialize;

use choquet_qmc::choquet::ChoquetError;
use choquet_qmc::compare::write_compare_csv;
use choquet_qmc::discrepancy::DEFAULT_WORK_BUDGET;
use choquet_qmc::{
    certify, compare_sweep, mc_estimate, qmc_estimate, star_discrepancy,
    star_discrepancy_lower_bound, theorem1_bound, Distortion, ErrorBound, Integrand, PointSet,
    Sweep,
};

const GRAMMAR_DOC: &str = "docs/expressions.md";

#[derive(Parser)]
#[command(
    name = "choquet-qmc",
    version,
    about = "Quasi-Monte Carlo Choquet integrals for distortion capacities"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the Choquet integral of a function and print JSON.
    Integrate(IntegrateArgs),
    /// Sweep n and write QMC and MC estimates side by side as CSV.
    Compare(CompareArgs),
    /// Star discrepancy of a point set as JSON.
    Discrepancy(DiscrepancyArgs),
    /// Certified error bound for a QMC estimate as JSON.
    Bound(BoundArgs),
    /// Write a generated point set as CSV.
    Points(PointsArgs),
}

#[derive(Args)]
struct FunctionArgs {
    /// `expr:<expression in u1..ud>` or `builtin:<name>`
    #[arg(long)]
    function: String,
    #[arg(long)]
    dim: usize,
    /// `avar:<λ>`, `power:<a>`, `identity` or `pwl:t1,y1;t2,y2;...`
    #[arg(long)]
    psi: Distortion,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum MethodArg {
    Qmc,
    Mc,
}

#[derive(Args)]
struct IntegrateArgs {
    #[command(flatten)]
    function: FunctionArgs,
    #[arg(long)]
    n: usize,
    #[arg(long, value_enum, default_value = "qmc")]
    method: MethodArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    start_index: u64,
    /// Also compute an error certificate (QMC only).
    #[arg(long)]
    bound: bool,
    #[arg(long, default_value_t = DEFAULT_WORK_BUDGET)]
    budget: u64,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    function: FunctionArgs,
    #[arg(long, default_value_t = 10_000)]
    n_start: usize,
    #[arg(long, default_value_t = 100_000)]
    n_end: usize,
    #[arg(long, default_value_t = 10_000)]
    n_step: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    start_index: u64,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
#[group(skip)]
#[command(group(ArgGroup::new("source").required(true).args(["halton", "random", "points"])))]
struct Source {
    /// Halton points `start_index, start_index + 1, ...`
    #[arg(long, requires_all = ["dim", "n"])]
    halton: bool,
    /// Pseudo-random points from `--seed`.
    #[arg(long, requires_all = ["dim", "n"])]
    random: bool,
    /// Point-set CSV with header `u1,...,ud`.
    #[arg(long, value_name = "CSV", conflicts_with_all = ["dim", "n"])]
    points: Option<PathBuf>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    start_index: u64,
}

impl Source {
    fn load(&self) -> Result<PointSet> {
        if let Some(path) = &self.points {
            let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            let pts = PointSet::read_csv(BufReader::new(file))
                .with_context(|| format!("reading {}", path.display()))?;
            return Ok(pts);
        }
        let (dim, n) = (self.dim.unwrap(), self.n.unwrap());
        let pts = if self.halton {
            PointSet::halton(dim, n, self.start_index)?
        } else {
            PointSet::pseudo_random(dim, n, self.seed)?
        };
        Ok(pts)
    }
}

#[derive(Args)]
struct DiscrepancyArgs {
    #[command(flatten)]
    source: Source,
    /// Grid lower bound with this many cells per axis instead of the exact value.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_WORK_BUDGET)]
    budget: u64,
}

#[derive(Args)]
struct BoundArgs {
    /// `expr:<expression in u1..ud>` or `builtin:<name>`
    #[arg(long)]
    function: String,
    #[arg(long)]
    psi: Distortion,
    #[command(flatten)]
    source: Source,
    /// Use the grid lower bound for D*. No certificate can follow from it.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_WORK_BUDGET)]
    budget: u64,
}

#[derive(Args)]
struct PointsArgs {
    #[arg(long)]
    dim: usize,
    #[arg(long)]
    n: usize,
    /// Pseudo-random points instead of Halton.
    #[arg(long)]
    random: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    start_index: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct IntegrateOutput {
    value: f64,
    n: usize,
    dim: usize,
    method: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    start_index: Option<u64>,
    psi: String,
    function: String,
    min_value: f64,
    max_value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    bound: Option<ErrorBound>,
}

/// Failures caused by the command line rather than by the computation.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn integrand(spec: &str, dim: usize) -> Result<Integrand> {
    Integrand::from_spec(spec, dim).map_err(|e| {
        UsageError(format!(
            "invalid value for '--function': {e} (grammar: {GRAMMAR_DOC})"
        ))
        .into()
    })
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn output(path: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn integrate(args: IntegrateArgs) -> Result<()> {
    let FunctionArgs { function, dim, psi } = &args.function;
    let f = integrand(function, *dim)?;
    if args.n == 0 {
        return Err(UsageError("'--n' must be at least 1".into()).into());
    }
    let (est, bound) = match args.method {
        MethodArg::Qmc => {
            let pts = PointSet::halton(*dim, args.n, args.start_index)?;
            let est = qmc_estimate(&f, &pts, psi)?;
            let bound = args.bound.then(|| certify(&f, &pts, psi, args.budget));
            (est, bound)
        }
        MethodArg::Mc => {
            if args.bound {
                return Err(UsageError(
                    "'--bound' needs '--method qmc'; use the bound subcommand with --random for MC points"
                        .into(),
                )
                .into());
            }
            (mc_estimate(&f, *dim, args.n, args.seed, psi)?, None)
        }
    };
    print_json(&IntegrateOutput {
        value: est.value,
        n: est.n,
        dim: *dim,
        method: match args.method {
            MethodArg::Qmc => "qmc",
            MethodArg::Mc => "mc",
        },
        seed: matches!(args.method, MethodArg::Mc).then_some(args.seed),
        start_index: matches!(args.method, MethodArg::Qmc).then_some(args.start_index),
        psi: psi.to_string(),
        function: f.label().to_string(),
        min_value: est.min_value,
        max_value: est.max_value,
        bound,
    })
}

fn compare(args: CompareArgs) -> Result<()> {
    let FunctionArgs { function, dim, psi } = &args.function;
    let f = integrand(function, *dim)?;
    let sweep = Sweep {
        n_start: args.n_start,
        n_end: args.n_end,
        n_step: args.n_step,
        seed: args.seed,
        start_index: args.start_index,
    };
    if sweep.n_start == 0 || sweep.n_start > sweep.n_end || sweep.n_step == 0 {
        return Err(UsageError(format!(
            "need 1 <= --n-start <= --n-end and --n-step >= 1, got {}..{} step {}",
            sweep.n_start, sweep.n_end, sweep.n_step
        ))
        .into());
    }
    let sizes = sweep.sizes();
    let total = sizes.len();
    let mut done = 0;
    let rows = compare_sweep(&f, psi, &sweep, |n| {
        done += 1;
        eprint!("\rn = {n} ({done}/{total})");
    })
    .map_err(|e| {
        let index = match &e {
            ChoquetError::Evaluation { index, .. } | ChoquetError::NotANumber { index } => {
                Some(*index)
            }
            _ => None,
        };
        // Every n that includes the failing point is lost; name the first.
        match index.and_then(|i| sizes.iter().find(|&&n| n > i)) {
            Some(n) => anyhow::Error::new(e).context(format!("estimate failed at n = {n}")),
            None => e.into(),
        }
    })?;
    if total > 0 {
        eprintln!();
    }
    let mut out = output(args.out.as_ref())?;
    write_compare_csv(&rows, &mut out)?;
    out.flush()?;
    Ok(())
}

fn discrepancy(args: DiscrepancyArgs) -> Result<()> {
    let pts = args.source.load()?;
    let result = match args.grid {
        Some(g) => star_discrepancy_lower_bound(&pts, g)
            .map_err(|e| UsageError(format!("invalid value for '--grid': {e}")))?,
        None => star_discrepancy(&pts, args.budget)?,
    };
    print_json(&result)
}

fn bound(args: BoundArgs) -> Result<()> {
    let pts = args.source.load()?;
    let f = integrand(&args.function, pts.dim())?;
    let result = match args.grid {
        Some(g) => {
            let disc = star_discrepancy_lower_bound(&pts, g)
                .map_err(|e| UsageError(format!("invalid value for '--grid': {e}")))?;
            theorem1_bound(&f, &pts, &args.psi, disc)
        }
        None => certify(&f, &pts, &args.psi, args.budget),
    };
    print_json(&result)
}

fn points(args: PointsArgs) -> Result<()> {
    let pts = if args.random {
        PointSet::pseudo_random(args.dim, args.n, args.seed)?
    } else {
        PointSet::halton(args.dim, args.n, args.start_index)?
    };
    let mut out = output(args.out.as_ref())?;
    pts.write_csv(&mut out)?;
    out.flush()?;
    Ok(())
}

/// `a: b: c` over the error chain, skipping causes already spelled out by
/// the message above them.
fn chain_message(e: &anyhow::Error) -> String {
    let mut msg = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !msg.ends_with(&text) {
            if !msg.is_empty() {
                msg.push_str(": ");
            }
            msg.push_str(&text);
        }
    }
    msg
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Integrate(a) => integrate(a),
        Command::Compare(a) => compare(a),
        Command::Discrepancy(a) => discrepancy(a),
        Command::Bound(a) => bound(a),
        Command::Points(a) => points(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {}", chain_message(&e));
            ExitCode::FAILURE
        }
    }
}
