//! Exact subproblem solver: depth-first branch-and-bound over the block's arcs.
//!
//! Interdiction sets are enumerated in lexicographic order of their sorted
//! arc positions (preorder over "append a larger arc"), and the incumbent is
//! only replaced on strict improvement, so the reported optimum is the
//! lexicographically smallest optimal set.
//!
//! Two prunes keep the tree small:
//! - the bound of a subtree is the value with every still-eligible arc
//!   interdicted (labels are monotone in the interdiction set);
//! - a strict improvement below `S` must interdict some arc of the current
//!   shortest route under `S`, so children past the last eligible route arc
//!   are never expanded.

use std::time::Instant;

use super::spec::SubproblemSpec;
use crate::graph::InterdictionSet;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BbOutcome {
    /// Best block-local interdiction found (subset of the spec's arcs).
    pub chosen: InterdictionSet,
    pub value: i64,
    /// False when the deadline cut the search short.
    pub complete: bool,
    pub nodes: u64,
}

pub fn bb_exact(spec: &SubproblemSpec<'_>) -> BbOutcome {
    bb_exact_until(spec, None)
}

pub fn bb_exact_until(spec: &SubproblemSpec<'_>, deadline: Option<Instant>) -> BbOutcome {
    let m = spec.arcs().len();
    let mut search = Search {
        spec,
        deadline,
        budget: spec.local_budget(),
        mask: vec![false; m],
        chosen: Vec::new(),
        best_value: i64::MIN,
        best: Vec::new(),
        complete: true,
        nodes: 0,
    };
    search.visit(0);
    let mut best_mask = vec![false; m];
    for &p in &search.best {
        best_mask[p] = true;
    }
    BbOutcome {
        chosen: spec.set_from_mask(&best_mask),
        value: search.best_value,
        complete: search.complete,
        nodes: search.nodes,
    }
}

struct Search<'s, 'a> {
    spec: &'s SubproblemSpec<'a>,
    deadline: Option<Instant>,
    budget: usize,
    mask: Vec<bool>,
    chosen: Vec<usize>,
    best_value: i64,
    best: Vec<usize>,
    complete: bool,
    nodes: u64,
}

impl Search<'_, '_> {
    fn visit(&mut self, next: usize) {
        self.nodes += 1;
        let eval = self.spec.evaluate(&self.mask);
        if eval.value > self.best_value {
            self.best_value = eval.value;
            self.best = self.chosen.clone();
        }
        if self.chosen.len() == self.budget {
            return;
        }
        let Some(last) = eval.route.iter().copied().filter(|&p| p >= next).max() else {
            return;
        };
        if self.deadline.is_some_and(|d| Instant::now() >= d) {
            self.complete = false;
            return;
        }

        let saved = self.mask.clone();
        for slot in &mut self.mask[next..] {
            *slot = true;
        }
        let bound = self.spec.evaluate(&self.mask).value;
        self.mask = saved;
        if bound <= self.best_value {
            return;
        }

        for k in next..=last {
            self.mask[k] = true;
            self.chosen.push(k);
            self.visit(k + 1);
            self.chosen.pop();
            self.mask[k] = false;
            if !self.complete {
                return;
            }
        }
    }
}
