#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use spni::graph::all_labels;
use spni::instance::generate_grid;
use spni::partition::partition;
use spni::qubo::pi_upper_bound;
use spni::subsolvers::{make_spec, SubproblemSpec};
use spni::{ArcSpec, InterdictionSet, Network, NodeId, ProblemInstance};

pub fn p3() -> ProblemInstance {
    let net = Network::new(3, vec![ArcSpec::new(0, 1, 2, 3), ArcSpec::new(1, 2, 4, 1)]);
    ProblemInstance::new(net, 0, 2, 1).unwrap()
}

pub fn d4() -> ProblemInstance {
    let arcs = [(0, 1), (0, 2), (1, 3), (2, 3)]
        .iter()
        .map(|&(u, v)| ArcSpec::new(u, v, 1, 10))
        .collect();
    ProblemInstance::new(Network::new(4, arcs), 0, 3, 2).unwrap()
}

/// Random sparse digraph with a guaranteed s-t chain 0 -> 1 -> ... -> n-1.
pub fn random_network<R: Rng>(rng: &mut R, nodes: usize, extra: usize, budget: usize) -> ProblemInstance {
    let mut arcs: Vec<ArcSpec> = (0..nodes - 1)
        .map(|v| ArcSpec::new(v, v + 1, rng.gen_range(0..=9), rng.gen_range(0..=9)))
        .collect();
    for _ in 0..extra {
        let u = rng.gen_range(0..nodes);
        let v = rng.gen_range(0..nodes);
        if u != v {
            arcs.push(ArcSpec::new(u, v, rng.gen_range(0..=9), rng.gen_range(0..=9)));
        }
    }
    let budget = budget.min(arcs.len());
    ProblemInstance::new(Network::new(nodes, arcs), 0, nodes - 1, budget).unwrap()
}

pub fn random_grid<R: Rng>(rng: &mut R, max_side: usize, max_budget: usize) -> ProblemInstance {
    let rows = rng.gen_range(2..=max_side);
    let cols = rng.gen_range(2..=max_side);
    let grid = generate_grid(rows, cols, rng.gen()).unwrap();
    let budget = rng.gen_range(0..=max_budget.min(grid.arc_count()));
    grid.with_budget(budget).unwrap()
}

pub fn random_subset<R: Rng>(rng: &mut R, arc_count: usize, max_len: usize) -> InterdictionSet {
    let mut ids: Vec<usize> = (0..arc_count).collect();
    ids.shuffle(rng);
    let len = rng.gen_range(0..=max_len.min(arc_count));
    ids.into_iter().take(len).collect()
}

/// A random block of a random partitioning, a random sink in it, and a
/// random base within budget. `None` when the block owns more than `max_arcs` arcs.
pub fn random_spec<'a, R: Rng>(
    rng: &mut R,
    inst: &'a ProblemInstance,
    max_arcs: usize,
) -> Option<SubproblemSpec<'a>> {
    let n = rng.gen_range(1..=6);
    let p = partition(inst.network(), n, rng);
    let block = p.blocks().choose(rng).unwrap().clone();
    let sink = *block.choose(rng).unwrap();
    let base = random_subset(rng, inst.arc_count(), inst.budget());
    let spec = make_spec(inst, &block, sink, &base).unwrap();
    (spec.arcs().len() <= max_arcs).then_some(spec)
}

/// Label of the spec's sink with `local_x` interdicted, by Bellman-Ford over
/// the block with outside labels fixed to the instance labels under the base.
pub fn oracle_local_distance(spec: &SubproblemSpec<'_>, local_x: &InterdictionSet) -> i64 {
    let inst = spec.instance();
    let net = inst.network();
    let gamma = all_labels(inst, spec.base()).unwrap();
    let cap = pi_upper_bound(inst);
    let block: Vec<NodeId> = spec.block().to_vec();
    let inside = |v: NodeId| block.binary_search(&v).is_ok();
    let mut label = vec![i64::MAX; net.node_count()];
    if inside(inst.source()) {
        label[inst.source()] = 0;
    }
    for _ in 0..=block.len() {
        let mut changed = false;
        for (k, a) in net.arcs().iter().enumerate() {
            if !inside(a.head) || a.head == inst.source() {
                continue;
            }
            let from = if inside(a.tail) { label[a.tail] } else { gamma[a.tail] };
            if from == i64::MAX {
                continue;
            }
            let cand = from + a.effective_length(local_x.contains(k));
            if cand < label[a.head] {
                label[a.head] = cand;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    label[spec.sink()].min(cap)
}

/// Lexicographically smallest maximizer over all subsets of the spec's arcs
/// within the local budget.
pub fn oracle_sub_optimum(spec: &SubproblemSpec<'_>) -> (Vec<usize>, i64) {
    let arcs = spec.arcs().to_vec();
    let mut best: Option<(Vec<usize>, i64)> = None;
    for mask in 0u32..(1u32 << arcs.len()) {
        if mask.count_ones() as usize > spec.local_budget() {
            continue;
        }
        let set: Vec<usize> = (0..arcs.len()).filter(|&i| mask >> i & 1 == 1).map(|i| arcs[i]).collect();
        let value = oracle_local_distance(spec, &set.iter().copied().collect());
        let better = match &best {
            None => true,
            Some((s, v)) => value > *v || (value == *v && set < *s),
        };
        if better {
            best = Some((set, value));
        }
    }
    best.unwrap()
}
