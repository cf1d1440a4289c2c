//! Block subproblems and the solvers that answer them.
//!
//! A subproblem fixes everything outside one block and asks which arcs
//! entering or inside the block to interdict so the label of a chosen sink
//! node is maximal. The answer is recombined with the untouched part of the
//! working solution.

mod anneal;
mod bb;
mod spec;

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Result, SpniError};
use crate::graph::InterdictionSet;
use crate::qubo::{build_sub_qubo, decode, default_penalty, for_each_assignment, MAX_EXHAUSTIVE_BITS};

pub use anneal::{qubo_anneal, AnnealParams, AnnealResult, Schedule};
pub use bb::{bb_exact, bb_exact_until, BbOutcome};
pub use spec::{local_distance, make_spec, SubproblemSpec};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SubSolverKind {
    /// Branch-and-bound on the combinatorial subproblem.
    BbExact,
    /// Exhaustive enumeration of the subproblem QUBO.
    QuboExhaustive { max_bits: usize },
    /// Simulated annealing on the subproblem QUBO.
    QuboAnneal(AnnealParams),
}

impl SubSolverKind {
    pub fn validate(&self) -> Result<()> {
        match self {
            SubSolverKind::BbExact => Ok(()),
            SubSolverKind::QuboExhaustive { max_bits } if *max_bits > MAX_EXHAUSTIVE_BITS => {
                Err(SpniError::InvalidInput(format!(
                    "max_bits {max_bits} exceeds {MAX_EXHAUSTIVE_BITS}"
                )))
            }
            SubSolverKind::QuboExhaustive { .. } => Ok(()),
            SubSolverKind::QuboAnneal(p) => p.validate().map_err(SpniError::InvalidInput),
        }
    }
}

impl fmt::Display for SubSolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SubSolverKind::BbExact => write!(f, "bb"),
            SubSolverKind::QuboExhaustive { max_bits } => write!(f, "exhaustive:{max_bits}"),
            SubSolverKind::QuboAnneal(p) => write!(f, "anneal:{}:{}", p.sweeps, p.restarts),
        }
    }
}

/// `bb`, `exhaustive[:max_bits]`, or `anneal[:sweeps[:restarts]]`.
impl FromStr for SubSolverKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let mut parts = s.split(':');
        let name = parts.next().unwrap_or_default();
        let nums: Vec<usize> = parts
            .map(|p| p.parse::<usize>().map_err(|e| format!("`{p}`: {e}")))
            .collect::<std::result::Result<_, _>>()?;
        let kind = match (name, nums.as_slice()) {
            ("bb", []) => SubSolverKind::BbExact,
            ("exhaustive", []) => SubSolverKind::QuboExhaustive { max_bits: 24 },
            ("exhaustive", [b]) => SubSolverKind::QuboExhaustive { max_bits: *b },
            ("anneal", rest) if rest.len() <= 2 => {
                let mut p = AnnealParams::default();
                if let Some(&s) = rest.first() {
                    p.sweeps = s;
                }
                if let Some(&r) = rest.get(1) {
                    p.restarts = r;
                }
                SubSolverKind::QuboAnneal(p)
            }
            _ => return Err(format!("unknown subsolver `{s}`")),
        };
        kind.validate().map_err(|e| e.to_string())?;
        Ok(kind)
    }
}

/// Solves the subproblem and returns the recombined global solution
/// `(base minus block arcs) union chosen`.
///
/// QUBO backends return the best feasible assignment they saw; if none
/// decoded within the local budget the block keeps no interdictions.
pub fn solve_sub<R: Rng + ?Sized>(
    spec: &SubproblemSpec<'_>,
    kind: &SubSolverKind,
    rng: &mut R,
) -> Result<InterdictionSet> {
    let chosen = match kind {
        SubSolverKind::BbExact => bb_exact(spec).chosen,
        SubSolverKind::QuboExhaustive { max_bits } => {
            let q = build_sub_qubo(spec, default_penalty(spec.instance()))?;
            if q.var_count() > *max_bits {
                return Err(SpniError::Capacity(format!(
                    "subproblem QUBO has {} variables, limit is {max_bits}",
                    q.var_count()
                )));
            }
            // feasible <=> the penalty part vanishes <=> value equals the objective
            let objective = q.objective();
            let mut best: Option<(i64, Vec<bool>)> = None;
            for_each_assignment(q.qubo(), |bits, value| {
                if best.as_ref().is_some_and(|(b, _)| value <= *b) {
                    return;
                }
                if value == objective.evaluate(bits) {
                    best = Some((value, bits.to_vec()));
                }
            })?;
            match best {
                Some((_, bits)) => decode(&q, &bits).interdicted,
                None => InterdictionSet::new(),
            }
        }
        SubSolverKind::QuboAnneal(params) => {
            let q = build_sub_qubo(spec, default_penalty(spec.instance()))?;
            let found = qubo_anneal(q.qubo(), params, rng);
            let x = decode(&q, &found.bits).interdicted;
            if x.len() <= spec.local_budget() {
                x
            } else {
                InterdictionSet::new()
            }
        }
    };
    Ok(spec.recombine(&chosen))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::{d4, p3};
    use crate::graph::{calc_length, NodeId, PathLength};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn p3_solve_sub_all_backends() {
        let inst = p3();
        let spec = make_spec(&inst, &[1, 2], 2, &InterdictionSet::new()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for kind in [
            SubSolverKind::BbExact,
            SubSolverKind::QuboExhaustive { max_bits: 24 },
            SubSolverKind::QuboAnneal(AnnealParams::default()),
        ] {
            let out = solve_sub(&spec, &kind, &mut rng).unwrap();
            assert_eq!(out, InterdictionSet::from([0]), "{kind}");
        }
    }

    #[test]
    fn d4_whole_graph() {
        let inst = d4();
        let all: Vec<NodeId> = (0..4).collect();
        let spec = make_spec(&inst, &all, 3, &InterdictionSet::new()).unwrap();
        let out = solve_sub(&spec, &SubSolverKind::BbExact, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let cuts = [[0, 1], [2, 3], [0, 3], [1, 2]].map(InterdictionSet::from);
        assert!(cuts.contains(&out));
        assert_eq!(calc_length(&inst, &out).unwrap(), PathLength::Finite(12));
    }

    #[test]
    fn arcs_outside_block_survive() {
        let inst = d4();
        let base = InterdictionSet::from([1]);
        let spec = make_spec(&inst, &[1, 3], 3, &base).unwrap();
        let out = solve_sub(&spec, &SubSolverKind::BbExact, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!(out.contains(1));
        assert!(out.len() <= inst.budget());
    }

    #[test]
    fn zero_local_budget() {
        let inst = p3().with_budget(1).unwrap();
        let base = InterdictionSet::from([0]);
        // block {2}: A_p = {e1}; e0 stays fixed and uses the whole budget
        let spec = make_spec(&inst, &[2], 2, &base).unwrap();
        assert_eq!(spec.local_budget(), 0);
        let out = solve_sub(&spec, &SubSolverKind::BbExact, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(out, base);
    }

    #[test]
    fn exhaustive_capacity_error() {
        let inst = p3();
        let spec = make_spec(&inst, &[1, 2], 2, &InterdictionSet::new()).unwrap();
        let err = solve_sub(
            &spec,
            &SubSolverKind::QuboExhaustive { max_bits: 10 },
            &mut ChaCha8Rng::seed_from_u64(0),
        )
        .unwrap_err();
        assert!(matches!(err, SpniError::Capacity(_)));
    }

    #[test]
    fn parse_kinds() {
        assert_eq!("bb".parse::<SubSolverKind>().unwrap(), SubSolverKind::BbExact);
        assert_eq!(
            "exhaustive:20".parse::<SubSolverKind>().unwrap(),
            SubSolverKind::QuboExhaustive { max_bits: 20 }
        );
        match "anneal:100:3".parse::<SubSolverKind>().unwrap() {
            SubSolverKind::QuboAnneal(p) => assert_eq!((p.sweeps, p.restarts), (100, 3)),
            other => panic!("{other:?}"),
        }
        assert!("exhaustive:31".parse::<SubSolverKind>().is_err());
        assert!("anneal:0".parse::<SubSolverKind>().is_err());
        assert!("gurobi".parse::<SubSolverKind>().is_err());
    }
}
