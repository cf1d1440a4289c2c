//! Greedy initial solution and iterative refinement.
//!
//! Both phases repartition the network every round and run a *sweep*: for
//! each node of interest, solve the subproblem of its block with that node as
//! sink and score the recombined solution by its s-t length. Sweep tasks are
//! independent and run on a rayon pool; each gets a generator seeded from
//! `(master seed, phase, round, probe, sink)`, and results are merged in sink
//! order, so the outcome does not depend on the worker count.

use std::collections::BTreeSet;
use std::io::Write;
use std::time::Instant;

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Result, SpniError};
use crate::graph::{calc_length, calc_path, InterdictionSet, NodeId, PathLength, ProblemInstance};
use crate::partition::{partition, Partitioning};
use crate::subsolvers::{make_spec, solve_sub, SubSolverKind};

/// What to do when the exhaustive QUBO backend meets a subproblem above its bit limit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Fallback {
    #[default]
    BbExact,
    Fail,
}

#[derive(Clone, Debug)]
pub struct RefineConfig {
    /// Target block size `n`.
    pub block_size: usize,
    /// Refinement rounds.
    pub iterations: usize,
    pub subsolver: SubSolverKind,
    pub fallback: Fallback,
    pub seed: u64,
    /// Worker threads for the sweep; never affects results.
    pub workers: usize,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            block_size: 20,
            iterations: 50,
            subsolver: SubSolverKind::BbExact,
            fallback: Fallback::BbExact,
            seed: 0,
            workers: 1,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.block_size == 0 {
            return Err(SpniError::InvalidInput("block size must be at least 1".into()));
        }
        self.subsolver.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    #[serde(serialize_with = "serialize_length")]
    pub objective: PathLength,
    pub solution_size: usize,
    pub candidates: usize,
    pub good_arcs: usize,
    pub millis: u128,
}

fn serialize_length<S: serde::Serializer>(v: &PathLength, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(v)
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RefineTrace {
    pub records: Vec<IterationRecord>,
}

impl RefineTrace {
    pub fn is_nondecreasing(&self) -> bool {
        self.records.windows(2).all(|w| w[0].objective <= w[1].objective)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.records {
            w.serialize(r).map_err(|e| SpniError::Io(e.into()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Result of one sweep.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SweepOutcome {
    pub best_length: PathLength,
    /// Distinct solutions reaching `best_length`, first occurrence in sink
    /// order; the base solution leads the list when nothing improved on it.
    pub candidates: Vec<InterdictionSet>,
    /// `(sink, recombined solution, its length)` for every swept node.
    pub per_sink: Vec<(NodeId, InterdictionSet, PathLength)>,
}

/// Solves one subproblem per node in `nodes` (sink = node, block = its
/// block in `partitioning`) against the working solution `base`.
pub fn sweep(
    inst: &ProblemInstance,
    partitioning: &Partitioning,
    nodes: &BTreeSet<NodeId>,
    base: &InterdictionSet,
    kind: &SubSolverKind,
    fallback: Fallback,
    seed: u64,
) -> Result<SweepOutcome> {
    let baseline = calc_length(inst, base)?;
    let sinks: Vec<NodeId> = nodes.iter().copied().collect();
    let per_sink: Vec<(NodeId, InterdictionSet, PathLength)> = sinks
        .par_iter()
        .map(|&sink| {
            let block = partitioning.block(partitioning.find_block(sink)?);
            let spec = make_spec(inst, block, sink, base)?;
            let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, sink as u64));
            let sol = match solve_sub(&spec, kind, &mut rng) {
                Err(SpniError::Capacity(msg)) if fallback == Fallback::BbExact => {
                    warn!("sink {sink}: {msg}; falling back to branch-and-bound");
                    solve_sub(&spec, &SubSolverKind::BbExact, &mut rng)?
                }
                other => other?,
            };
            let len = calc_length(inst, &sol)?;
            Ok((sink, sol, len))
        })
        .collect::<Result<_>>()?;

    let best_length = per_sink
        .iter()
        .map(|(_, _, l)| *l)
        .max()
        .map_or(baseline, |m| m.max(baseline));
    let mut candidates = Vec::new();
    if best_length == baseline {
        candidates.push(base.clone());
    }
    for (_, sol, len) in &per_sink {
        if *len == best_length && !candidates.contains(sol) {
            candidates.push(sol.clone());
        }
    }
    Ok(SweepOutcome {
        best_length,
        candidates,
        per_sink,
    })
}

const PHASE_INIT: u64 = 1;
const PHASE_REFINE: u64 = 2;
const STREAM_PARTITION: u64 = 1;
const STREAM_SWEEP: u64 = 2;
const STREAM_PICK: u64 = 3;

/// splitmix64 finalizer over `a ^ rotated b`.
fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.rotate_left(32) ^ 0x9E37_79B9_7F4A_7C15;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn derive(parts: &[u64]) -> u64 {
    parts.iter().fold(0x5350_4E49, |acc, &p| mix(acc, p))
}

struct Runner<'a> {
    inst: &'a ProblemInstance,
    cfg: &'a RefineConfig,
    pool: rayon::ThreadPool,
}

impl<'a> Runner<'a> {
    fn new(inst: &'a ProblemInstance, cfg: &'a RefineConfig) -> Result<Self> {
        cfg.validate()?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers.max(1))
            .build()
            .map_err(|e| SpniError::InvalidInput(format!("thread pool: {e}")))?;
        Ok(Self { inst, cfg, pool })
    }

    fn partition(&self, phase: u64, round: u64) -> Partitioning {
        let mut rng = ChaCha8Rng::seed_from_u64(derive(&[self.cfg.seed, phase, round, STREAM_PARTITION]));
        partition(self.inst.network(), self.cfg.block_size, &mut rng)
    }

    fn sweep(
        &self,
        p: &Partitioning,
        nodes: &BTreeSet<NodeId>,
        base: &InterdictionSet,
        key: [u64; 3],
    ) -> Result<SweepOutcome> {
        let seed = derive(&[self.cfg.seed, key[0], key[1], key[2], STREAM_SWEEP]);
        self.pool.install(|| {
            sweep(
                self.inst,
                p,
                nodes,
                base,
                &self.cfg.subsolver,
                self.cfg.fallback,
                seed,
            )
        })
    }

    fn initial(&self) -> Result<InterdictionSet> {
        let inst = self.inst;
        let mut pick = ChaCha8Rng::seed_from_u64(derive(&[self.cfg.seed, PHASE_INIT, STREAM_PICK]));
        let mut current = InterdictionSet::new();
        let prev_nodes = calc_path(inst, &current)?;
        for round in 1..=inst.budget() as u64 {
            let p = self.partition(PHASE_INIT, round);
            let mut nodes = calc_path(inst, &current)?;
            nodes.extend(prev_nodes.iter().copied());
            let out = self.sweep(&p, &nodes, &current, [PHASE_INIT, round, 0])?;
            current = out
                .candidates
                .choose(&mut pick)
                .cloned()
                .unwrap_or(current);
            debug_assert!(current.len() <= inst.budget());
        }
        Ok(current)
    }

    fn refine(&self, start: InterdictionSet) -> Result<(InterdictionSet, RefineTrace)> {
        let inst = self.inst;
        if start.len() > inst.budget() {
            return Err(SpniError::InvalidInput(format!(
                "starting solution has {} arcs, budget is {}",
                start.len(),
                inst.budget()
            )));
        }
        let mut pick = ChaCha8Rng::seed_from_u64(derive(&[self.cfg.seed, PHASE_REFINE, STREAM_PICK]));
        let mut current = start;
        let prev_nodes = calc_path(inst, &current)?;
        let mut good_arcs: BTreeSet<usize> = BTreeSet::new();
        let mut trace = RefineTrace::default();
        trace.records.push(IterationRecord {
            iteration: 0,
            objective: calc_length(inst, &current)?,
            solution_size: current.len(),
            candidates: 0,
            good_arcs: 0,
            millis: 0,
        });

        for round in 1..=self.cfg.iterations as u64 {
            let started = Instant::now();
            let p = self.partition(PHASE_REFINE, round);
            let mut nodes = calc_path(inst, &current)?;
            nodes.extend(prev_nodes.iter().copied());
            let prev_length = calc_length(inst, &current)?;
            let out = self.sweep(&p, &nodes, &current, [PHASE_REFINE, round, 0])?;

            if out.best_length > prev_length {
                current = out
                    .candidates
                    .choose(&mut pick)
                    .cloned()
                    .expect("an improving sweep has candidates");
                good_arcs.clear();
            } else {
                let probes: Vec<usize> = current.iter().filter(|k| !good_arcs.contains(k)).collect();
                for arc in probes {
                    let mut reduced = current.clone();
                    reduced.remove(arc);
                    let probe = self.sweep(&p, &nodes, &reduced, [PHASE_REFINE, round, arc as u64 + 1])?;
                    let improved = probe
                        .per_sink
                        .into_iter()
                        .find(|(_, _, len)| *len > prev_length);
                    match improved {
                        Some((_, sol, _)) => {
                            current = sol;
                            good_arcs.clear();
                            break;
                        }
                        None => {
                            good_arcs.insert(arc);
                        }
                    }
                }
            }
            debug_assert!(current.len() <= inst.budget());
            debug_assert!(good_arcs.iter().all(|&k| current.contains(k)));

            trace.records.push(IterationRecord {
                iteration: round as usize,
                objective: calc_length(inst, &current)?,
                solution_size: current.len(),
                candidates: out.candidates.len(),
                good_arcs: good_arcs.len(),
                millis: started.elapsed().as_millis(),
            });
        }
        Ok((current, trace))
    }
}

/// Greedy construction: one sweep per budget unit along the current
/// shortest path (plus the uninterdicted shortest path), adopting a random
/// best candidate each round.
pub fn initial_solution(inst: &ProblemInstance, cfg: &RefineConfig) -> Result<InterdictionSet> {
    Runner::new(inst, cfg)?.initial()
}

/// Improves `start` over `cfg.iterations` rounds. The s-t length never decreases.
pub fn refine(
    inst: &ProblemInstance,
    cfg: &RefineConfig,
    start: InterdictionSet,
) -> Result<(InterdictionSet, RefineTrace)> {
    Runner::new(inst, cfg)?.refine(start)
}

/// [`initial_solution`] followed by [`refine`].
pub fn solve_spni(inst: &ProblemInstance, cfg: &RefineConfig) -> Result<(InterdictionSet, RefineTrace)> {
    let runner = Runner::new(inst, cfg)?;
    let start = runner.initial()?;
    runner.refine(start)
}
