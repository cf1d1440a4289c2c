use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::error::{Result, SpniError};
use crate::graph::{all_labels, is_weakly_connected, ArcId, InterdictionSet, NodeId, ProblemInstance};
use crate::qubo::pi_upper_bound;

/// One block subproblem: free labels inside `block`, fixed labels `gamma`
/// outside it, and interdiction decisions on the arcs whose head lies in the
/// block.
#[derive(Clone, Debug)]
pub struct SubproblemSpec<'a> {
    inst: &'a ProblemInstance,
    block: Vec<NodeId>,
    sink: NodeId,
    base: InterdictionSet,
    gamma: Vec<i64>,
    local_budget: usize,
    arcs: Vec<ArcId>,
    inner: Vec<ArcId>,
    entering: Vec<ArcId>,
    local: LocalGraph,
}

/// Block-local view used by the evaluator. Arcs are addressed by their
/// position in `SubproblemSpec::arcs`.
#[derive(Clone, Debug)]
struct LocalGraph {
    size: usize,
    source: Option<usize>,
    sink: usize,
    cap: i64,
    // (tail local index or None if outside, head local index, c, d, gamma of outside tail)
    arcs: Vec<LocalArc>,
    out: Vec<Vec<usize>>,
    entering: Vec<usize>,
}

#[derive(Clone, Copy, Debug)]
struct LocalArc {
    tail: Option<usize>,
    head: usize,
    length: i64,
    increment: i64,
    fixed_tail_label: i64,
}

/// Value of a subproblem under one local interdiction choice, plus the arcs
/// (as local positions) of a shortest route into the sink.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct LocalEval {
    pub value: i64,
    pub route: Vec<usize>,
}

pub fn make_spec<'a>(
    inst: &'a ProblemInstance,
    block: &[NodeId],
    sink: NodeId,
    base: &InterdictionSet,
) -> Result<SubproblemSpec<'a>> {
    let n = inst.node_count();
    let mut block = block.to_vec();
    block.sort_unstable();
    block.dedup();
    if block.is_empty() {
        return Err(SpniError::InvalidInput("empty block".into()));
    }
    if let Some(&v) = block.iter().find(|&&v| v >= n) {
        return Err(SpniError::InvalidInput(format!("block node {v} out of range")));
    }
    if block.binary_search(&sink).is_err() {
        return Err(SpniError::InvalidInput(format!("sink {sink} is not in the block")));
    }
    if !is_weakly_connected(inst.network(), &block) {
        return Err(SpniError::InvalidInput("block is not weakly connected".into()));
    }
    base.check_against(inst.network())?;
    if base.len() > inst.budget() {
        return Err(SpniError::InvalidInput(format!(
            "working solution has {} arcs, budget is {}",
            base.len(),
            inst.budget()
        )));
    }

    let mut local_index = vec![None; n];
    for (i, &v) in block.iter().enumerate() {
        local_index[v] = Some(i);
    }
    let gamma = all_labels(inst, base)?;
    let net = inst.network();

    let mut arcs = Vec::new();
    let mut inner = Vec::new();
    let mut entering = Vec::new();
    let mut local = LocalGraph {
        size: block.len(),
        source: local_index[inst.source()],
        sink: local_index[sink].expect("sink in block"),
        cap: pi_upper_bound(inst),
        arcs: Vec::new(),
        out: vec![Vec::new(); block.len()],
        entering: Vec::new(),
    };
    for (k, a) in net.arcs().iter().enumerate() {
        let Some(head) = local_index[a.head] else { continue };
        let pos = arcs.len();
        arcs.push(k);
        let tail = local_index[a.tail];
        match tail {
            Some(t) => {
                inner.push(k);
                local.out[t].push(pos);
            }
            None => {
                entering.push(k);
                local.entering.push(pos);
            }
        }
        local.arcs.push(LocalArc {
            tail,
            head,
            length: a.length,
            increment: a.increment,
            fixed_tail_label: if tail.is_none() { gamma[a.tail] } else { 0 },
        });
    }

    let outside_used = base
        .iter()
        .filter(|&k| local_index[net.arc(k).head].is_none())
        .count();
    let local_budget = inst.budget() - outside_used;

    Ok(SubproblemSpec {
        inst,
        block,
        sink,
        base: base.clone(),
        gamma,
        local_budget,
        arcs,
        inner,
        entering,
        local,
    })
}

impl<'a> SubproblemSpec<'a> {
    pub fn instance(&self) -> &'a ProblemInstance {
        self.inst
    }

    pub fn block(&self) -> &[NodeId] {
        &self.block
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.block.binary_search(&v).is_ok()
    }

    pub fn sink(&self) -> NodeId {
        self.sink
    }

    pub fn base(&self) -> &InterdictionSet {
        &self.base
    }

    pub fn gamma(&self) -> &[i64] {
        &self.gamma
    }

    pub fn local_budget(&self) -> usize {
        self.local_budget
    }

    /// All arcs with head in the block, ascending.
    pub fn arcs(&self) -> &[ArcId] {
        &self.arcs
    }

    /// Arcs with both ends in the block.
    pub fn inner_arcs(&self) -> &[ArcId] {
        &self.inner
    }

    /// Arcs entering the block from outside.
    pub fn entering_arcs(&self) -> &[ArcId] {
        &self.entering
    }

    pub fn owns_arc(&self, k: ArcId) -> bool {
        self.arcs.binary_search(&k).is_ok()
    }

    /// Working-solution arcs the subproblem cannot touch.
    pub fn fixed_part(&self) -> InterdictionSet {
        self.base.iter().filter(|&k| !self.owns_arc(k)).collect()
    }

    /// Working-solution arcs inside the subproblem's scope.
    pub fn local_part(&self) -> InterdictionSet {
        self.base.iter().filter(|&k| self.owns_arc(k)).collect()
    }

    /// `(base minus scope) union chosen`.
    pub fn recombine(&self, chosen: &InterdictionSet) -> InterdictionSet {
        self.fixed_part().iter().chain(chosen.iter()).collect()
    }

    pub(crate) fn mask_for(&self, local_x: &InterdictionSet) -> Result<Vec<bool>> {
        if local_x.len() > self.local_budget {
            return Err(SpniError::InvalidInput(format!(
                "{} interdicted arcs exceed the local budget {}",
                local_x.len(),
                self.local_budget
            )));
        }
        let mut mask = vec![false; self.arcs.len()];
        for k in local_x.iter() {
            let pos = self.arcs.binary_search(&k).map_err(|_| {
                SpniError::InvalidInput(format!("arc {k} does not enter the block"))
            })?;
            mask[pos] = true;
        }
        Ok(mask)
    }

    pub(crate) fn set_from_mask(&self, mask: &[bool]) -> InterdictionSet {
        mask.iter()
            .zip(&self.arcs)
            .filter(|(&m, _)| m)
            .map(|(_, &k)| k)
            .collect()
    }

    /// Label-correcting evaluation with block-local interdictions `mask`.
    pub(crate) fn evaluate(&self, mask: &[bool]) -> LocalEval {
        let g = &self.local;
        let mut dist: Vec<Option<i64>> = vec![None; g.size];
        let mut pred: Vec<Option<usize>> = vec![None; g.size];
        let mut heap = BinaryHeap::new();

        let offer = |dist: &mut Vec<Option<i64>>, pred: &mut Vec<Option<usize>>, v: usize, d: i64, via: Option<usize>| {
            if dist[v].is_none_or(|old| d < old) {
                dist[v] = Some(d);
                pred[v] = via;
                true
            } else {
                false
            }
        };
        if let Some(s) = g.source {
            offer(&mut dist, &mut pred, s, 0, None);
        }
        for &pos in &g.entering {
            let a = g.arcs[pos];
            let w = if mask[pos] { a.length + a.increment } else { a.length };
            offer(&mut dist, &mut pred, a.head, a.fixed_tail_label + w, Some(pos));
        }
        for (v, d) in dist.iter().enumerate() {
            if let Some(d) = d {
                heap.push(Reverse((*d, v)));
            }
        }
        let mut settled = vec![false; g.size];
        while let Some(Reverse((d, u))) = heap.pop() {
            if settled[u] || dist[u] != Some(d) {
                continue;
            }
            settled[u] = true;
            if u == g.sink {
                break;
            }
            for &pos in &g.out[u] {
                let a = g.arcs[pos];
                if settled[a.head] {
                    continue;
                }
                let w = if mask[pos] { a.length + a.increment } else { a.length };
                if offer(&mut dist, &mut pred, a.head, d + w, Some(pos)) {
                    heap.push(Reverse((d + w, a.head)));
                }
            }
        }

        let Some(d) = dist[g.sink] else {
            return LocalEval {
                value: g.cap,
                route: Vec::new(),
            };
        };
        let mut route = Vec::new();
        let mut v = g.sink;
        while let Some(pos) = pred[v] {
            route.push(pos);
            match g.arcs[pos].tail {
                Some(t) => v = t,
                None => break,
            }
        }
        LocalEval {
            value: d.min(g.cap),
            route,
        }
    }
}

/// Shortest distance to the subproblem sink when the block's own arcs in
/// `local_x` are interdicted and labels outside the block are held at gamma.
/// Capped at the label upper bound.
pub fn local_distance(spec: &SubproblemSpec<'_>, local_x: &InterdictionSet) -> Result<i64> {
    let mask = spec.mask_for(local_x)?;
    Ok(spec.evaluate(&mask).value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::{d4, p3};
    use crate::instance::generate_grid;
    use crate::partition::partition;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn p3_spec_shape() {
        let inst = p3();
        let spec = make_spec(&inst, &[1, 2], 2, &InterdictionSet::new()).unwrap();
        assert_eq!(spec.gamma(), &[0, 2, 6]);
        assert_eq!(spec.local_budget(), 1);
        assert_eq!(spec.inner_arcs(), &[1]);
        assert_eq!(spec.entering_arcs(), &[0]);
        assert_eq!(spec.arcs(), &[0, 1]);

        let spec = make_spec(&inst, &[1, 2], 2, &InterdictionSet::from([0])).unwrap();
        assert_eq!(spec.local_budget(), 1);
    }

    #[test]
    fn d4_budget_outside_block() {
        let inst = d4();
        let spec = make_spec(&inst, &[1, 3], 3, &InterdictionSet::from([1])).unwrap();
        assert_eq!(spec.local_budget(), 1);
        assert_eq!(spec.fixed_part(), InterdictionSet::from([1]));
    }

    #[test]
    fn sink_outside_block_rejected() {
        let inst = p3();
        let err = make_spec(&inst, &[1, 2], 0, &InterdictionSet::new()).unwrap_err();
        assert!(matches!(err, SpniError::InvalidInput(_)));
        assert!(make_spec(&inst, &[0, 2], 2, &InterdictionSet::new()).is_err());
    }

    #[test]
    fn p3_local_distances() {
        let inst = p3();
        let spec = make_spec(&inst, &[1, 2], 2, &InterdictionSet::new()).unwrap();
        assert_eq!(local_distance(&spec, &InterdictionSet::from([0])).unwrap(), 9);
        assert_eq!(local_distance(&spec, &InterdictionSet::new()).unwrap(), 6);
        assert_eq!(local_distance(&spec, &InterdictionSet::from([1])).unwrap(), 7);
        assert!(local_distance(&spec, &InterdictionSet::from([0, 1])).is_err());
    }

    #[test]
    fn whole_graph_matches_global_labels() {
        let inst = generate_grid(3, 4, 11).unwrap().with_budget(3).unwrap();
        let all: Vec<NodeId> = (0..inst.node_count()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..30 {
            let sink = rng.gen_range(0..inst.node_count());
            let spec = make_spec(&inst, &all, sink, &InterdictionSet::new()).unwrap();
            let x: InterdictionSet = (0..3).map(|_| rng.gen_range(0..inst.arc_count())).collect();
            let labels = all_labels(&inst, &x).unwrap();
            assert_eq!(local_distance(&spec, &x).unwrap(), labels[sink]);
        }
    }

    #[test]
    fn block_labels_are_a_fixed_point() {
        // keeping the working solution's own arcs reproduces its global labels
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for seed in 0..20 {
            let inst = generate_grid(4, 4, seed).unwrap().with_budget(3).unwrap();
            let p = partition(inst.network(), 6, &mut rng);
            let mut arcs: Vec<ArcId> = (0..inst.arc_count()).collect();
            arcs.shuffle(&mut rng);
            let base: InterdictionSet = arcs[..3].iter().copied().collect();
            let labels = all_labels(&inst, &base).unwrap();
            for block in p.blocks() {
                for &sink in block {
                    let spec = make_spec(&inst, block, sink, &base).unwrap();
                    let got = local_distance(&spec, &spec.local_part()).unwrap();
                    assert_eq!(got, labels[sink]);
                }
            }
        }
    }

    #[test]
    fn route_ends_at_sink() {
        let inst = p3();
        let spec = make_spec(&inst, &[1, 2], 2, &InterdictionSet::new()).unwrap();
        let e = spec.evaluate(&[false, false]);
        assert_eq!(e.value, 6);
        assert_eq!(e.route, vec![1, 0]);
    }
}
