//! Command-line front end. [`run`] returns the process exit code:
//! 0 success, 2 usage, 3 input or parse failure, 4 capacity, 1 anything else.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use log::LevelFilter;
use serde::Serialize;

use crate::bench::{
    brute_force_optimum, full_bb, run_benchmark, write_bench_csv, BenchConfig, Baseline, BudgetRule,
    DEFAULT_ENUMERATION_CAP,
};
use crate::error::{Result, SpniError};
use crate::graph::{calc_length, InterdictionSet, NodeId, PathLength, ProblemInstance};
use crate::instance::{budget_from_fraction, generate_grid, instance_to_string, read_instance};
use crate::qubo::{build_full_qubo, build_sub_qubo, default_penalty, Sense};
use crate::refine::{solve_spni, Fallback, RefineConfig};
use crate::subsolvers::{make_spec, SubSolverKind};

#[derive(Parser, Debug)]
#[command(name = "spni", version, about = "Shortest path network interdiction by decomposition and refinement")]
struct Cli {
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a square or rectangular grid instance.
    Generate(GenerateArgs),
    /// Run the decomposition solver.
    Solve(SolveArgs),
    /// Solve the full problem directly (enumeration or branch-and-bound).
    Baseline(BaselineArgs),
    /// Write the full or a block-subproblem QUBO.
    ExportQubo(ExportArgs),
    /// Run the grid benchmark and write result rows as CSV.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
#[command(group = clap::ArgGroup::new("budget_rule").args(["budget", "budget_frac"]))]
struct GenerateArgs {
    #[arg(long)]
    rows: usize,
    #[arg(long)]
    cols: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    budget: Option<usize>,
    /// Budget as a fraction of the arc count, floored at 1.
    #[arg(long)]
    budget_frac: Option<f64>,
    /// Instance file to write; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Target block size.
    #[arg(long, default_value_t = 20)]
    n: usize,
    /// Refinement iterations.
    #[arg(long, default_value_t = 50)]
    lambda: usize,
    /// bb, exhaustive[:max_bits] or anneal[:sweeps[:restarts]].
    #[arg(long, default_value = "bb")]
    subsolver: SubSolverKind,
    /// Fail instead of falling back to branch-and-bound when a QUBO is too large.
    #[arg(long)]
    no_fallback: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long)]
    trace_out: Option<PathBuf>,
    /// Solution file to write; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
enum BaselineMode {
    Bruteforce,
    Bb,
}

#[derive(Args, Debug)]
struct BaselineArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_enum, default_value = "bb")]
    mode: BaselineMode,
    /// Seconds; branch-and-bound only. Unlimited when absent.
    #[arg(long)]
    timeout: Option<f64>,
    /// Maximum number of sets the enumeration may visit.
    #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
    cap: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExportArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Block subproblem as "<space-separated nodes>,<sink>", e.g. "1 2,2".
    #[arg(long)]
    sub: Option<String>,
    /// Fixed interdictions outside the block, comma-separated arc ids.
    #[arg(long, value_delimiter = ',')]
    base: Vec<usize>,
    #[arg(long, default_value = "max")]
    sense: Sense,
    /// Penalty weight; defaults to the label upper bound plus one.
    #[arg(long)]
    penalty: Option<i64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(group = clap::ArgGroup::new("budget_rule").args(["budget", "budget_frac"]))]
struct BenchArgs {
    /// Start from a named parameter set: A, B-text, B-caption or C.
    #[arg(long)]
    preset: Option<String>,
    /// Grid side lengths, comma-separated.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    #[arg(long)]
    budget_frac: Option<f64>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    lambda: Option<usize>,
    /// Seeds, comma-separated.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    subsolver: Option<SubSolverKind>,
    /// match (baseline gets the refinement's wall time), fixed:<secs>, or oracle.
    #[arg(long, default_value = "match")]
    timeout_mode: String,
    /// Rows solved concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let level = if cli.verbose { LevelFilter::Info } else { LevelFilter::Warn };
    let _ = env_logger::Builder::new().filter_level(level).try_init();

    let outcome = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Baseline(a) => cmd_baseline(a),
        Command::ExportQubo(a) => cmd_export_qubo(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &SpniError) -> i32 {
    match e {
        SpniError::InvalidInput(_) => 2,
        SpniError::Parse { .. } | SpniError::InvalidInstance(_) | SpniError::Unreachable | SpniError::Io(_) => 3,
        SpniError::Capacity(_) => 4,
        SpniError::Invariant(_) => 1,
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn load(path: &Path) -> Result<ProblemInstance> {
    read_instance(path)
}

#[derive(Serialize)]
struct SolutionFile {
    interdicted: Vec<usize>,
    length: Option<i64>,
    budget_used: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    optimal: Option<bool>,
}

fn solution_json(set: &InterdictionSet, length: PathLength, optimal: Option<bool>) -> String {
    let file = SolutionFile {
        interdicted: set.to_vec(),
        length: length.finite(),
        budget_used: set.len(),
        optimal,
    };
    let mut s = serde_json::to_string(&file).expect("solution serializes");
    s.push('\n');
    s
}

fn cmd_generate(a: GenerateArgs) -> Result<()> {
    let grid = generate_grid(a.rows, a.cols, a.seed)?;
    let budget = match (a.budget, a.budget_frac) {
        (Some(b), _) => b,
        (None, Some(f)) if f.is_finite() && f >= 0.0 => budget_from_fraction(grid.arc_count(), f),
        (None, Some(f)) => return Err(SpniError::InvalidInput(format!("bad budget fraction {f}"))),
        (None, None) => 1,
    };
    if budget > grid.arc_count() {
        return Err(SpniError::InvalidInput(format!(
            "budget {budget} exceeds arc count {}",
            grid.arc_count()
        )));
    }
    let inst = grid.with_budget(budget)?;
    emit(a.out.as_deref(), &instance_to_string(&inst))?;
    let summary = format!("nodes {} arcs {} budget {}", inst.node_count(), inst.arc_count(), inst.budget());
    if a.out.is_some() {
        println!("{summary}");
    } else {
        eprintln!("{summary}");
    }
    Ok(())
}

fn cmd_solve(a: SolveArgs) -> Result<()> {
    let inst = load(&a.instance)?;
    let cfg = RefineConfig {
        block_size: a.n,
        iterations: a.lambda,
        subsolver: a.subsolver,
        fallback: if a.no_fallback { Fallback::Fail } else { Fallback::BbExact },
        seed: a.seed,
        workers: a.workers,
    };
    let (sol, trace) = solve_spni(&inst, &cfg)?;
    if let Some(p) = &a.trace_out {
        trace.write_csv(fs::File::create(p)?)?;
    }
    let length = calc_length(&inst, &sol)?;
    emit(a.out.as_deref(), &solution_json(&sol, length, None))
}

fn cmd_baseline(a: BaselineArgs) -> Result<()> {
    let inst = load(&a.instance)?;
    let (set, length, optimal) = match a.mode {
        BaselineMode::Bruteforce => {
            let (set, f) = brute_force_optimum(&inst, a.cap)?;
            (set, f, true)
        }
        BaselineMode::Bb => {
            let timeout = match a.timeout {
                None => None,
                Some(t) => Some(
                    Duration::try_from_secs_f64(t)
                        .map_err(|e| SpniError::InvalidInput(format!("timeout {t}: {e}")))?,
                ),
            };
            let out = full_bb(&inst, timeout)?;
            (out.interdicted, out.length, out.optimal)
        }
    };
    emit(a.out.as_deref(), &solution_json(&set, length, Some(optimal)))
}

fn parse_sub(text: &str) -> Result<(Vec<NodeId>, NodeId)> {
    let bad = |m: String| SpniError::InvalidInput(format!("--sub \"{text}\": {m}"));
    let (nodes, sink) = text
        .rsplit_once(',')
        .ok_or_else(|| bad("expected \"<nodes>,<sink>\"".into()))?;
    let nodes = nodes
        .split_whitespace()
        .map(|t| t.parse::<NodeId>().map_err(|e| bad(format!("`{t}`: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    let sink = sink.trim().parse::<NodeId>().map_err(|e| bad(format!("sink: {e}")))?;
    Ok((nodes, sink))
}

fn cmd_export_qubo(a: ExportArgs) -> Result<()> {
    let inst = load(&a.instance)?;
    let penalty = a.penalty.unwrap_or_else(|| default_penalty(&inst));
    if penalty < 1 {
        return Err(SpniError::InvalidInput(format!("penalty must be positive, got {penalty}")));
    }
    let q = match &a.sub {
        None => build_full_qubo(&inst, penalty),
        Some(text) => {
            let (nodes, sink) = parse_sub(text)?;
            let base: InterdictionSet = a.base.iter().copied().collect();
            let spec = make_spec(&inst, &nodes, sink, &base)?;
            build_sub_qubo(&spec, penalty)?
        }
    };
    emit(a.out.as_deref(), &q.qubo().to_export_string(a.sense))
}

fn parse_baseline(mode: &str) -> Result<Baseline> {
    match mode.split_once(':') {
        None if mode == "match" => Ok(Baseline::MatchRefine),
        None if mode == "oracle" => Ok(Baseline::Oracle {
            cap: DEFAULT_ENUMERATION_CAP,
        }),
        Some(("fixed", secs)) => secs
            .parse::<f64>()
            .ok()
            .and_then(|s| Duration::try_from_secs_f64(s).ok())
            .map(Baseline::Fixed)
            .ok_or_else(|| SpniError::InvalidInput(format!("bad timeout `{secs}`"))),
        _ => Err(SpniError::InvalidInput(format!(
            "timeout mode must be match, fixed:<secs> or oracle, got `{mode}`"
        ))),
    }
}

fn cmd_bench(a: BenchArgs) -> Result<()> {
    let mut cfg = match &a.preset {
        Some(name) => BenchConfig::preset(name)
            .ok_or_else(|| SpniError::InvalidInput(format!("unknown preset `{name}`")))?,
        None => BenchConfig::preset("A").expect("preset A exists"),
    };
    if let Some(sizes) = a.sizes {
        cfg.sizes = sizes;
    } else if a.preset.is_none() {
        return Err(SpniError::InvalidInput("--sizes is required without --preset".into()));
    }
    if let Some(seeds) = a.seeds {
        cfg.seeds = seeds;
    }
    match (a.budget, a.budget_frac) {
        (Some(b), _) => cfg.budget = BudgetRule::Fixed(b),
        (None, Some(f)) => cfg.budget = BudgetRule::Fraction(f),
        (None, None) => {}
    }
    if let Some(n) = a.n {
        cfg.block_size = n;
    }
    if let Some(l) = a.lambda {
        cfg.iterations = l;
    }
    if let Some(s) = a.subsolver {
        cfg.subsolver = s;
    }
    cfg.baseline = parse_baseline(&a.timeout_mode)?;
    cfg.jobs = a.jobs;

    let rows = run_benchmark(&cfg)?;
    let mut buf = Vec::new();
    write_bench_csv(&rows, &mut buf)?;
    emit(a.out.as_deref(), std::str::from_utf8(&buf).expect("csv is utf-8"))
}
