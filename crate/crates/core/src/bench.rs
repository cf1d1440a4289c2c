//! Baselines, the quality metric and the grid experiment harness.

use std::io::Write;
use std::time::{Duration, Instant};

use log::warn;
use rayon::prelude::*;

use crate::error::{Result, SpniError};
use crate::graph::{calc_length, InterdictionSet, NodeId, PathLength, ProblemInstance};
use crate::instance::{budget_from_fraction, generate_grid};
use crate::refine::{solve_spni, Fallback, RefineConfig};
use crate::subsolvers::{bb_exact_until, make_spec, SubSolverKind};

/// Default cap on the number of subsets [`brute_force_optimum`] will examine.
pub const DEFAULT_ENUMERATION_CAP: u64 = 5_000_000;

/// `sum_{k <= r} C(m, k)`, saturating.
pub fn subset_count(m: usize, r: usize) -> u64 {
    let mut total: u64 = 0;
    let mut c: u128 = 1;
    for k in 0..=r.min(m) {
        total = total.saturating_add(u64::try_from(c).unwrap_or(u64::MAX));
        c = c * (m - k) as u128 / (k + 1) as u128;
        if c > u64::MAX as u128 {
            c = u64::MAX as u128;
        }
    }
    total
}

/// Exact optimum by enumerating every interdiction set of size at most the
/// budget; the lexicographically smallest optimal set is returned.
pub fn brute_force_optimum(inst: &ProblemInstance, cap: u64) -> Result<(InterdictionSet, PathLength)> {
    let m = inst.arc_count();
    let count = subset_count(m, inst.budget());
    if count > cap {
        return Err(SpniError::Capacity(format!(
            "{count} interdiction sets to enumerate, cap is {cap}"
        )));
    }
    let mut current = Vec::with_capacity(inst.budget());
    let mut best = (Vec::new(), calc_length(inst, &InterdictionSet::new())?);
    enumerate(inst, 0, &mut current, &mut best)?;
    Ok((best.0.into_iter().collect(), best.1))
}

fn enumerate(
    inst: &ProblemInstance,
    next: usize,
    current: &mut Vec<usize>,
    best: &mut (Vec<usize>, PathLength),
) -> Result<()> {
    if current.len() == inst.budget() {
        return Ok(());
    }
    for k in next..inst.arc_count() {
        current.push(k);
        let len = calc_length(inst, &current.iter().copied().collect())?;
        if len > best.1 {
            *best = (current.clone(), len);
        }
        enumerate(inst, k + 1, current, best)?;
        current.pop();
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FullBbResult {
    pub interdicted: InterdictionSet,
    pub length: PathLength,
    /// False when the timeout stopped the search.
    pub optimal: bool,
}

/// Branch-and-bound on the whole network (block = all nodes, sink = t).
/// On timeout the incumbent is returned with `optimal = false`.
pub fn full_bb(inst: &ProblemInstance, timeout: Option<Duration>) -> Result<FullBbResult> {
    let deadline = timeout.map(|t| Instant::now() + t);
    let all: Vec<NodeId> = (0..inst.node_count()).collect();
    let spec = make_spec(inst, &all, inst.sink(), &InterdictionSet::new())?;
    let out = bb_exact_until(&spec, deadline);
    let interdicted = spec.recombine(&out.chosen);
    let length = calc_length(inst, &interdicted)?;
    Ok(FullBbResult {
        interdicted,
        length,
        optimal: out.complete,
    })
}

/// `(r - f) / max(r, f)`; zero when both are zero. Positive means the
/// refinement beat the baseline.
pub fn quality(r: i64, f: i64) -> f64 {
    let denom = r.max(f);
    if denom == 0 {
        return 0.0;
    }
    (r - f) as f64 / denom as f64
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BudgetRule {
    /// `max(1, round(fraction * |A|))`.
    Fraction(f64),
    Fixed(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Baseline {
    /// B&B with the refinement's wall time as its timeout.
    MatchRefine,
    /// B&B with a fixed timeout.
    Fixed(Duration),
    /// Exhaustive enumeration, capped.
    Oracle { cap: u64 },
}

#[derive(Clone, Debug)]
pub struct BenchConfig {
    /// Side lengths of the square grids.
    pub sizes: Vec<usize>,
    pub seeds: Vec<u64>,
    pub budget: BudgetRule,
    pub block_size: usize,
    pub iterations: usize,
    pub subsolver: SubSolverKind,
    pub baseline: Baseline,
    /// Rows solved concurrently.
    pub jobs: usize,
}

impl BenchConfig {
    /// Named parameter sets: `A` (fraction 0.0025, n=20), `B-text` (0.005),
    /// `B-caption` (0.05), `C` (0.0025, n=40). All use 50 iterations.
    pub fn preset(name: &str) -> Option<Self> {
        let (fraction, n) = match name {
            "A" => (0.0025, 20),
            "B-text" => (0.005, 20),
            "B-caption" => (0.05, 20),
            "C" => (0.0025, 40),
            _ => return None,
        };
        Some(Self {
            sizes: vec![10, 20, 30],
            seeds: (0..5).collect(),
            budget: BudgetRule::Fraction(fraction),
            block_size: n,
            iterations: 50,
            subsolver: SubSolverKind::BbExact,
            baseline: Baseline::MatchRefine,
            jobs: 1,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() || self.seeds.is_empty() {
            return Err(SpniError::InvalidInput("sizes and seeds must be non-empty".into()));
        }
        if let Some(s) = self.sizes.iter().find(|&&s| s < 2) {
            return Err(SpniError::InvalidInput(format!("grid side {s} is below 2")));
        }
        if let BudgetRule::Fraction(f) = self.budget {
            if !(f.is_finite() && f >= 0.0) {
                return Err(SpniError::InvalidInput(format!("bad budget fraction {f}")));
            }
        }
        if self.block_size == 0 {
            return Err(SpniError::InvalidInput("block size must be at least 1".into()));
        }
        self.subsolver.validate()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    /// Node count of the generated grid.
    pub size: usize,
    pub seed: u64,
    pub budget: usize,
    pub r: Option<i64>,
    pub f: Option<i64>,
    pub quality: Option<f64>,
    pub refine_ms: u128,
    pub baseline_ms: u128,
    pub baseline_timed_out: bool,
    pub error: Option<String>,
}

pub const CSV_HEADER: [&str; 9] = [
    "size",
    "seed",
    "budget",
    "r",
    "f",
    "quality",
    "refine_ms",
    "baseline_ms",
    "baseline_timed_out",
];

fn finite(len: PathLength) -> Result<i64> {
    len.finite().ok_or(SpniError::Unreachable)
}

fn run_row(cfg: &BenchConfig, side: usize, seed: u64) -> BenchRow {
    let mut row = BenchRow {
        size: side * side + 2,
        seed,
        budget: 0,
        r: None,
        f: None,
        quality: None,
        refine_ms: 0,
        baseline_ms: 0,
        baseline_timed_out: false,
        error: None,
    };
    if let Err(e) = fill_row(cfg, side, seed, &mut row) {
        warn!("row size={side} seed={seed}: {e}");
        row.error = Some(e.to_string());
    }
    row
}

fn fill_row(cfg: &BenchConfig, side: usize, seed: u64, row: &mut BenchRow) -> Result<()> {
    let grid = generate_grid(side, side, seed)?;
    let budget = match cfg.budget {
        BudgetRule::Fraction(f) => budget_from_fraction(grid.arc_count(), f),
        BudgetRule::Fixed(b) => b,
    };
    let inst = grid.with_budget(budget)?;
    row.budget = budget;

    let refine_cfg = RefineConfig {
        block_size: cfg.block_size,
        iterations: cfg.iterations,
        subsolver: cfg.subsolver,
        fallback: Fallback::BbExact,
        seed,
        workers: 1,
    };
    let started = Instant::now();
    let (sol, _) = solve_spni(&inst, &refine_cfg)?;
    let refine_time = started.elapsed();
    row.refine_ms = refine_time.as_millis();
    let r = finite(calc_length(&inst, &sol)?)?;
    row.r = Some(r);

    let started = Instant::now();
    let (f, timed_out) = match cfg.baseline {
        Baseline::MatchRefine => {
            let out = full_bb(&inst, Some(refine_time))?;
            (finite(out.length)?, !out.optimal)
        }
        Baseline::Fixed(t) => {
            let out = full_bb(&inst, Some(t))?;
            (finite(out.length)?, !out.optimal)
        }
        Baseline::Oracle { cap } => (finite(brute_force_optimum(&inst, cap)?.1)?, false),
    };
    row.baseline_ms = started.elapsed().as_millis();
    row.f = Some(f);
    row.baseline_timed_out = timed_out;
    row.quality = Some(quality(r, f));
    Ok(())
}

/// One row per `(size, seed)`, in config order. Failed rows carry an error
/// and empty result columns.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    cfg.validate()?;
    let cases: Vec<(usize, u64)> = cfg
        .sizes
        .iter()
        .flat_map(|&s| cfg.seeds.iter().map(move |&seed| (s, seed)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs.max(1))
        .build()
        .map_err(|e| SpniError::InvalidInput(format!("thread pool: {e}")))?;
    Ok(pool.install(|| cases.par_iter().map(|&(s, seed)| run_row(cfg, s, seed)).collect()))
}

pub fn write_bench_csv<W: Write>(rows: &[BenchRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| SpniError::Io(e.into());
    w.write_record(CSV_HEADER).map_err(io)?;
    let opt = |v: Option<i64>| v.map(|x| x.to_string()).unwrap_or_default();
    for row in rows {
        w.write_record([
            row.size.to_string(),
            row.seed.to_string(),
            row.budget.to_string(),
            opt(row.r),
            opt(row.f),
            row.quality.map(|q| format!("{q:.6}")).unwrap_or_default(),
            row.refine_ms.to_string(),
            row.baseline_ms.to_string(),
            row.baseline_timed_out.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::{d4, p3};

    #[test]
    fn brute_force_examples() {
        let (set, f) = brute_force_optimum(&p3(), 100).unwrap();
        assert_eq!(set, InterdictionSet::from([0]));
        assert_eq!(f, PathLength::Finite(9));

        let (set, f) = brute_force_optimum(&d4(), 100).unwrap();
        assert_eq!(f, PathLength::Finite(12));
        assert_eq!(set, InterdictionSet::from([0, 1]));

        let zero = p3().with_budget(0).unwrap();
        assert_eq!(
            brute_force_optimum(&zero, 1).unwrap(),
            (InterdictionSet::new(), PathLength::Finite(6))
        );
    }

    #[test]
    fn brute_force_cap() {
        assert_eq!(subset_count(4, 2), 11);
        assert_eq!(subset_count(3, 5), 8);
        assert!(matches!(brute_force_optimum(&d4(), 10), Err(SpniError::Capacity(_))));
    }

    #[test]
    fn full_bb_examples() {
        let out = full_bb(&p3(), Some(Duration::from_secs(10))).unwrap();
        assert_eq!(
            out,
            FullBbResult {
                interdicted: InterdictionSet::from([0]),
                length: PathLength::Finite(9),
                optimal: true
            }
        );
        let rushed = full_bb(&d4(), Some(Duration::ZERO)).unwrap();
        assert!(!rushed.optimal);
    }

    #[test]
    fn full_bb_matches_oracle_on_grid() {
        let inst = generate_grid(5, 5, 0).unwrap().with_budget(2).unwrap();
        let bb = full_bb(&inst, Some(Duration::from_secs(60))).unwrap();
        assert!(bb.optimal);
        let (set, f) = brute_force_optimum(&inst, DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!(bb.length, f);
        assert_eq!(bb.interdicted, set);
    }

    #[test]
    fn quality_examples() {
        assert_eq!(quality(9, 9), 0.0);
        assert!((quality(9, 10) + 0.1).abs() < 1e-12);
        assert!((quality(10, 9) - 0.1).abs() < 1e-12);
        assert_eq!(quality(0, 0), 0.0);
        assert_eq!(quality(3, 7), -quality(7, 3));
    }

    #[test]
    fn desk_regime_oracle_dominance() {
        let cfg = BenchConfig {
            sizes: vec![4],
            seeds: vec![0, 1],
            budget: BudgetRule::Fixed(2),
            block_size: 6,
            iterations: 3,
            subsolver: SubSolverKind::BbExact,
            baseline: Baseline::Oracle {
                cap: DEFAULT_ENUMERATION_CAP,
            },
            jobs: 2,
        };
        let rows = run_benchmark(&cfg).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].seed, 0);
        for row in &rows {
            assert!(row.error.is_none());
            assert_eq!(row.size, 18);
            assert!(row.quality.unwrap() <= 0.0);
        }
        let mut buf = Vec::new();
        write_bench_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("size,seed,budget,r,f,quality,refine_ms,baseline_ms,baseline_timed_out\n18,0,2,"));
    }

    #[test]
    fn failed_rows_are_recorded() {
        let cfg = BenchConfig {
            sizes: vec![3],
            seeds: vec![0],
            budget: BudgetRule::Fixed(2),
            block_size: 6,
            iterations: 0,
            subsolver: SubSolverKind::BbExact,
            baseline: Baseline::Oracle { cap: 1 },
            jobs: 1,
        };
        let rows = run_benchmark(&cfg).unwrap();
        assert!(rows[0].error.as_deref().unwrap().contains("cap"));
        assert!(rows[0].r.is_some());
        assert!(rows[0].f.is_none());
    }

    #[test]
    fn presets_and_validation() {
        assert_eq!(BenchConfig::preset("C").unwrap().block_size, 40);
        assert_eq!(BenchConfig::preset("B-caption").unwrap().budget, BudgetRule::Fraction(0.05));
        assert!(BenchConfig::preset("Z").is_none());
        let mut cfg = BenchConfig::preset("A").unwrap();
        cfg.sizes.clear();
        assert!(cfg.validate().is_err());
    }
}
