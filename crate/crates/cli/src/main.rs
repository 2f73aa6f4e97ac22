//! `tsnip`: snippet discovery, length sweeps, labeling and evaluation
//! from the command line.
//!
//! Exit codes: 0 success, 1 runtime error, 2 usage error.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{error::ErrorKind, Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde_json::Value;
use tsnip::scheduler::{sweep, CostSource, SweepOptions, TrainingLog};
use tsnip::{
    evaluate, label_series, load_series, make_grid, select_snippets_with, Exec, GridRule,
    LabelSequence, MPdistParams, SnippetResult, SubseqRule, TimeSeries,
};

const DEFAULT_TRAINING_LOG: &str = "tsnip-training.jsonl";

#[derive(Parser)]
#[command(
    name = "tsnip",
    version,
    about = "Time series snippets: discovery, length selection and labeling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Find snippets for one fixed length.
    Discover(DiscoverArgs),
    /// Evaluate a range of lengths and report the best one.
    Sweep(SweepArgs),
    /// Label every point of the series with its best-matching snippet.
    Label(LabelArgs),
    /// Score predicted labels against ground truth.
    Eval(EvalArgs),
}

#[derive(Args)]
struct InputArgs {
    /// CSV file, one record per line.
    #[arg(long)]
    input: PathBuf,
    /// Zero-based column to read.
    #[arg(long, default_value_t = 0)]
    column: usize,
}

#[derive(Args)]
struct SnippetArgs {
    /// Number of snippets.
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Subsequence length inside MPdist (default: ceil(m / 2)).
    #[arg(long)]
    l: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum GridKind {
    Pow2,
    Arith,
}

#[derive(Args)]
struct RangeArgs {
    #[arg(long)]
    m_min: Option<usize>,
    #[arg(long)]
    m_max: Option<usize>,
    /// Grid between m-min and m-max.
    #[arg(long, value_enum, default_value = "pow2")]
    grid: GridKind,
    /// Step for the arithmetic grid.
    #[arg(long, default_value_t = 8)]
    step: usize,
}

#[derive(Args)]
struct PoolArgs {
    /// Parallel workers the length grid is split across.
    #[arg(long, env = "TSNIP_WORKERS", default_value_t = 1)]
    workers: usize,
    /// Threads inside each worker.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Degree of the runtime regression.
    #[arg(long, default_value_t = 2)]
    degree: usize,
    /// JSON-lines file of observed runtimes.
    #[arg(long, env = "TSNIP_TRAINING_LOG", default_value = DEFAULT_TRAINING_LOG)]
    training_log: PathBuf,
    /// Neither read nor append the training log.
    #[arg(long)]
    no_log: bool,
}

#[derive(Args)]
struct DiscoverArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Snippet length.
    #[arg(long)]
    m: usize,
    #[command(flatten)]
    snippet: SnippetArgs,
    /// Threads for the segment profiles.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Write the JSON here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Write the representativeness curve, one value per line.
    #[arg(long)]
    export_curve: Option<PathBuf>,
    /// Write the snippet profiles, one column per snippet.
    #[arg(long)]
    export_profiles: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    range: RangeArgs,
    #[command(flatten)]
    snippet: SnippetArgs,
    #[command(flatten)]
    pool: PoolArgs,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Curve of the winning length.
    #[arg(long)]
    export_curve: Option<PathBuf>,
    #[arg(long)]
    export_profiles: Option<PathBuf>,
}

#[derive(Args)]
struct LabelArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Fixed snippet length; alternatively give --m-min and --m-max.
    #[arg(long)]
    m: Option<usize>,
    #[command(flatten)]
    range: RangeArgs,
    #[command(flatten)]
    snippet: SnippetArgs,
    #[command(flatten)]
    pool: PoolArgs,
    /// Labels CSV; stdout if omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Also write the snippet JSON used for labeling.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Predicted labels, one integer per line.
    #[arg(long)]
    pred: PathBuf,
    /// Ground-truth labels, same format.
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn usage_error(msg: impl std::fmt::Display) -> ! {
    Cli::command().error(ErrorKind::ValueValidation, msg).exit()
}

fn writer(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json(path: Option<&Path>, value: &Value) -> Result<()> {
    let mut out = writer(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn export(result: &SnippetResult, curve: Option<&Path>, profiles: Option<&Path>) -> Result<()> {
    if let Some(path) = curve {
        let mut out = writer(Some(path))?;
        for v in &result.curve {
            writeln!(out, "{v}")?;
        }
        out.flush()?;
    }
    if let Some(path) = profiles {
        let mut out = writer(Some(path))?;
        let header: Vec<String> = result
            .snippets
            .iter()
            .map(|s| format!("segment_{}", s.index))
            .collect();
        writeln!(out, "{}", header.join(","))?;
        for j in 0..result.curve.len() {
            let row: Vec<String> = result
                .profiles
                .iter()
                .map(|p| p.values[j].to_string())
                .collect();
            writeln!(out, "{}", row.join(","))?;
        }
        out.flush()?;
    }
    Ok(())
}

fn load(input: &InputArgs) -> Result<TimeSeries> {
    load_series(&input.input, input.column)
        .with_context(|| format!("loading {}", input.input.display()))
}

fn check_counts(k: usize, workers: usize, threads: usize) {
    if k == 0 {
        usage_error("--k must be at least 1");
    }
    if workers == 0 || threads == 0 {
        usage_error("--workers and --threads must be at least 1");
    }
}

fn grid_from(range: &RangeArgs) -> Vec<usize> {
    let (Some(lo), Some(hi)) = (range.m_min, range.m_max) else {
        usage_error("both --m-min and --m-max are required for a sweep");
    };
    let rule = match range.grid {
        GridKind::Pow2 => GridRule::PowerOfTwo,
        GridKind::Arith => GridRule::Arithmetic(range.step),
    };
    make_grid(lo, hi, rule).unwrap_or_else(|e| usage_error(e))
}

fn rule_from(l: Option<usize>) -> SubseqRule {
    l.map_or(SubseqRule::Half, SubseqRule::Fixed)
}

fn run_sweep(
    ts: &TimeSeries,
    grid: &[usize],
    snippet: &SnippetArgs,
    pool: &PoolArgs,
) -> Result<tsnip::scheduler::SweepOutput> {
    let log = TrainingLog::new(&pool.training_log);
    let history = if pool.no_log { Vec::new() } else { log.load()? };
    let options = SweepOptions {
        rule: rule_from(snippet.l),
        count: snippet.k,
        workers: pool.workers,
        exec: Exec::with_threads(pool.threads),
        degree: pool.degree,
    };
    let out = sweep(ts, grid, &options, &history)?;
    let source = match &out.cost_source {
        CostSource::Default => "operation count".to_string(),
        CostSource::Learned(model) => format!("regression on {} runs", model.training_set.len()),
    };
    for (w, jobs) in out.schedule.assignments.iter().enumerate() {
        let ms: Vec<usize> = jobs.iter().map(|&j| grid[j]).collect();
        eprintln!(
            "worker {w}: m = {ms:?} (predicted {:.3e}, {source})",
            out.schedule.predicted_loads[w]
        );
    }
    if !pool.no_log {
        log.append(&out.observations)?;
    }
    Ok(out)
}

fn cmd_discover(args: &DiscoverArgs) -> Result<()> {
    check_counts(args.snippet.k, 1, args.threads);
    let ts = load(&args.input)?;
    let params = MPdistParams::new(args.m, args.snippet.l)?;
    let result = select_snippets_with(
        &ts,
        &params,
        args.snippet.k,
        &Exec::with_threads(args.threads),
    )?;
    export(
        &result,
        args.export_curve.as_deref(),
        args.export_profiles.as_deref(),
    )?;
    write_json(args.output.as_deref(), &result.to_json())
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    check_counts(args.snippet.k, args.pool.workers, args.pool.threads);
    let grid = grid_from(&args.range);
    let ts = load(&args.input)?;
    let out = run_sweep(&ts, &grid, &args.snippet, &args.pool)?;
    let best = &out.report.best().result;
    export(
        best,
        args.export_curve.as_deref(),
        args.export_profiles.as_deref(),
    )?;
    let mut doc = out.report.to_json();
    doc["best"] = best.to_json();
    write_json(args.output.as_deref(), &doc)
}

fn cmd_label(args: &LabelArgs) -> Result<()> {
    check_counts(args.snippet.k, args.pool.workers, args.pool.threads);
    let ranged = args.range.m_min.is_some() || args.range.m_max.is_some();
    let ts = load(&args.input)?;
    let result = match (args.m, ranged) {
        (Some(_), true) | (None, false) => {
            usage_error("give exactly one of --m or --m-min/--m-max")
        }
        (Some(m), false) => {
            let params = MPdistParams::new(m, args.snippet.l)?;
            select_snippets_with(
                &ts,
                &params,
                args.snippet.k,
                &Exec::with_threads(args.pool.threads),
            )?
        }
        (None, true) => {
            let grid = grid_from(&args.range);
            let out = run_sweep(&ts, &grid, &args.snippet, &args.pool)?;
            out.report.best().result.clone()
        }
    };
    if let Some(path) = &args.report {
        write_json(Some(path), &result.to_json())?;
    }
    let labels = label_series(&result, ts.len())?;
    let mut out = writer(args.output.as_deref())?;
    labels.write_csv(&mut out)?;
    out.flush()?;
    Ok(())
}

fn read_labels(path: &Path) -> Result<LabelSequence> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    LabelSequence::read_csv(file).with_context(|| format!("reading {}", path.display()))
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let pred = read_labels(&args.pred)?;
    let truth = read_labels(&args.truth)?;
    if pred.len() != truth.len() {
        bail!(
            "predicted labels have length {}, truth has length {}",
            pred.len(),
            truth.len()
        );
    }
    let report = evaluate(&pred, &truth)?;
    write_json(args.output.as_deref(), &report.to_json())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Discover(a) => cmd_discover(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Label(a) => cmd_label(a),
        Command::Eval(a) => cmd_eval(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
