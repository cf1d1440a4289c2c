//! Directed networks and interdiction-aware shortest paths.
//!
//! Every arc `k` has a base length `c_k` and an interdiction increment `d_k`.
//! Under an [`InterdictionSet`] the effective length of `k` is
//! `c_k + d_k` when `k` is interdicted and `c_k` otherwise. All lengths are
//! exact integers.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SpniError};
use crate::instance::{self, Violation};
use crate::qubo::pi_upper_bound;

pub type NodeId = usize;
pub type ArcId = usize;

/// One directed arc: `tail -> head` with base length and interdiction increment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ArcSpec {
    pub tail: NodeId,
    pub head: NodeId,
    pub length: i64,
    pub increment: i64,
}

impl ArcSpec {
    pub fn new(tail: NodeId, head: NodeId, length: i64, increment: i64) -> Self {
        Self {
            tail,
            head,
            length,
            increment,
        }
    }

    #[inline]
    pub fn effective_length(&self, interdicted: bool) -> i64 {
        if interdicted {
            self.length + self.increment
        } else {
            self.length
        }
    }
}

/// A directed multigraph. Arc identity is the index into [`Network::arcs`].
#[derive(Clone, Debug)]
pub struct Network {
    node_count: usize,
    arcs: Vec<ArcSpec>,
    out_arcs: Vec<Vec<ArcId>>,
    in_arcs: Vec<Vec<ArcId>>,
}

impl PartialEq for Network {
    fn eq(&self, other: &Self) -> bool {
        self.node_count == other.node_count && self.arcs == other.arcs
    }
}

impl Eq for Network {}

impl Network {
    /// Builds the adjacency lists. Arcs with out-of-range endpoints are kept in
    /// the arc list (so validation can report them) but left out of adjacency.
    pub fn new(node_count: usize, arcs: Vec<ArcSpec>) -> Self {
        let mut out_arcs = vec![Vec::new(); node_count];
        let mut in_arcs = vec![Vec::new(); node_count];
        for (k, a) in arcs.iter().enumerate() {
            if a.tail < node_count && a.head < node_count {
                out_arcs[a.tail].push(k);
                in_arcs[a.head].push(k);
            }
        }
        Self {
            node_count,
            arcs,
            out_arcs,
            in_arcs,
        }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn arc_count(&self) -> usize {
        self.arcs.len()
    }

    pub fn arcs(&self) -> &[ArcSpec] {
        &self.arcs
    }

    pub fn arc(&self, k: ArcId) -> &ArcSpec {
        &self.arcs[k]
    }

    pub fn out_arcs(&self, v: NodeId) -> &[ArcId] {
        &self.out_arcs[v]
    }

    pub fn in_arcs(&self, v: NodeId) -> &[ArcId] {
        &self.in_arcs[v]
    }

    /// `max_k (c_k + d_k)`, or 0 for an arcless network.
    pub fn max_interdicted_length(&self) -> i64 {
        self.arcs
            .iter()
            .map(|a| a.length + a.increment)
            .max()
            .unwrap_or(0)
    }

    /// Neighbour lists of the undirected skeleton, deduplicated, without self loops.
    pub fn undirected_neighbors(&self) -> Vec<Vec<NodeId>> {
        let mut nbrs: Vec<BTreeSet<NodeId>> = vec![BTreeSet::new(); self.node_count];
        for a in &self.arcs {
            if a.tail != a.head && a.tail < self.node_count && a.head < self.node_count {
                nbrs[a.tail].insert(a.head);
                nbrs[a.head].insert(a.tail);
            }
        }
        nbrs.into_iter().map(|s| s.into_iter().collect()).collect()
    }
}

/// A network together with source, sink and interdiction budget.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProblemInstance {
    network: Network,
    source: NodeId,
    sink: NodeId,
    budget: usize,
}

impl ProblemInstance {
    pub fn new(network: Network, source: NodeId, sink: NodeId, budget: usize) -> Result<Self> {
        let inst = Self::new_unchecked(network, source, sink, budget);
        let violations = instance::validate(&inst);
        if violations.is_empty() {
            Ok(inst)
        } else {
            Err(SpniError::InvalidInstance(violations))
        }
    }

    /// Skips validation; use [`instance::validate`] to inspect the result.
    pub fn new_unchecked(network: Network, source: NodeId, sink: NodeId, budget: usize) -> Self {
        Self {
            network,
            source,
            sink,
            budget,
        }
    }

    pub fn with_budget(mut self, budget: usize) -> Result<Self> {
        if budget > self.network.arc_count() {
            return Err(SpniError::InvalidInstance(vec![
                Violation::BudgetExceedsArcCount {
                    budget,
                    arcs: self.network.arc_count(),
                },
            ]));
        }
        self.budget = budget;
        Ok(self)
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn source(&self) -> NodeId {
        self.source
    }

    pub fn sink(&self) -> NodeId {
        self.sink
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn node_count(&self) -> usize {
        self.network.node_count
    }

    pub fn arc_count(&self) -> usize {
        self.network.arcs.len()
    }
}

/// A set of interdicted arc ids. Iteration and ordering are by arc id, so two
/// sets compare lexicographically on their sorted contents.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InterdictionSet(BTreeSet<ArcId>);

impl InterdictionSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn contains(&self, k: ArcId) -> bool {
        self.0.contains(&k)
    }

    pub fn insert(&mut self, k: ArcId) -> bool {
        self.0.insert(k)
    }

    pub fn remove(&mut self, k: ArcId) -> bool {
        self.0.remove(&k)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = ArcId> + '_ {
        self.0.iter().copied()
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn to_vec(&self) -> Vec<ArcId> {
        self.0.iter().copied().collect()
    }

    /// Indicator vector over `arc_count` arcs.
    pub fn mask(&self, arc_count: usize) -> Vec<bool> {
        let mut m = vec![false; arc_count];
        for k in self.iter() {
            if k < arc_count {
                m[k] = true;
            }
        }
        m
    }

    pub fn check_against(&self, net: &Network) -> Result<()> {
        match self.0.iter().find(|&&k| k >= net.arc_count()) {
            Some(k) => Err(SpniError::InvalidInput(format!(
                "arc id {k} out of range (network has {} arcs)",
                net.arc_count()
            ))),
            None => Ok(()),
        }
    }
}

impl FromIterator<ArcId> for InterdictionSet {
    fn from_iter<I: IntoIterator<Item = ArcId>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

impl<const N: usize> From<[ArcId; N]> for InterdictionSet {
    fn from(arr: [ArcId; N]) -> Self {
        arr.into_iter().collect()
    }
}

impl fmt::Display for InterdictionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, k) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{k}")?;
        }
        write!(f, "}}")
    }
}

/// Shortest s-t length; `Unreachable` orders above every finite length.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PathLength {
    Finite(i64),
    Unreachable,
}

impl PathLength {
    pub fn finite(self) -> Option<i64> {
        match self {
            PathLength::Finite(v) => Some(v),
            PathLength::Unreachable => None,
        }
    }

    pub fn is_reachable(self) -> bool {
        matches!(self, PathLength::Finite(_))
    }
}

impl fmt::Display for PathLength {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PathLength::Finite(v) => write!(f, "{v}"),
            PathLength::Unreachable => write!(f, "unreachable"),
        }
    }
}

/// Dijkstra output: distances and the chosen predecessor arc for every node.
#[derive(Clone, Debug)]
pub(crate) struct ShortestPathTree {
    pub dist: Vec<Option<i64>>,
    pub pred: Vec<Option<ArcId>>,
}

impl ShortestPathTree {
    /// Arcs of the tree path ending at `target`, from the root outwards.
    pub fn path_arcs(&self, net: &Network, target: NodeId) -> Option<Vec<ArcId>> {
        self.dist[target]?;
        let mut arcs = Vec::new();
        let mut v = target;
        while let Some(k) = self.pred[v] {
            arcs.push(k);
            v = net.arc(k).tail;
        }
        arcs.reverse();
        Some(arcs)
    }
}

/// Dijkstra from `source` under the given per-arc weights (all ≥ 0).
///
/// Among equally short routes the predecessor of a node is the smallest-id
/// tail settled before it; settled-before keeps the predecessor graph acyclic
/// even with zero-length cycles.
pub(crate) fn shortest_path_tree(net: &Network, source: NodeId, weights: &[i64]) -> ShortestPathTree {
    let n = net.node_count();
    let mut dist: Vec<Option<i64>> = vec![None; n];
    let mut pred: Vec<Option<ArcId>> = vec![None; n];
    let mut settled = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[source] = Some(0);
    heap.push(Reverse((0i64, source)));
    while let Some(Reverse((d, u))) = heap.pop() {
        if settled[u] || dist[u] != Some(d) {
            continue;
        }
        settled[u] = true;
        for &k in net.out_arcs(u) {
            let v = net.arc(k).head;
            if settled[v] {
                continue;
            }
            let nd = d + weights[k];
            match dist[v] {
                Some(old) if nd > old => {}
                Some(old) if nd == old => {
                    let better = pred[v].is_some_and(|p| u < net.arc(p).tail);
                    if better {
                        pred[v] = Some(k);
                    }
                }
                _ => {
                    dist[v] = Some(nd);
                    pred[v] = Some(k);
                    heap.push(Reverse((nd, v)));
                }
            }
        }
    }
    ShortestPathTree { dist, pred }
}

pub(crate) fn effective_weights(net: &Network, interdicted: &InterdictionSet) -> Vec<i64> {
    let mut w: Vec<i64> = net.arcs().iter().map(|a| a.length).collect();
    for k in interdicted.iter() {
        w[k] += net.arc(k).increment;
    }
    w
}

fn tree_for(inst: &ProblemInstance, interdicted: &InterdictionSet) -> Result<ShortestPathTree> {
    interdicted.check_against(inst.network())?;
    let w = effective_weights(inst.network(), interdicted);
    Ok(shortest_path_tree(inst.network(), inst.source(), &w))
}

/// Shortest s-t length after interdicting `interdicted`.
pub fn calc_length(inst: &ProblemInstance, interdicted: &InterdictionSet) -> Result<PathLength> {
    let tree = tree_for(inst, interdicted)?;
    Ok(match tree.dist[inst.sink()] {
        Some(d) => PathLength::Finite(d),
        None => PathLength::Unreachable,
    })
}

/// Nodes of one shortest s-t path after interdiction (deterministic tie-break).
pub fn calc_path(inst: &ProblemInstance, interdicted: &InterdictionSet) -> Result<BTreeSet<NodeId>> {
    let arcs = shortest_path_arcs(inst, interdicted)?;
    let net = inst.network();
    let mut nodes: BTreeSet<NodeId> = arcs.iter().map(|&k| net.arc(k).head).collect();
    nodes.insert(inst.source());
    Ok(nodes)
}

/// Arcs of the path reported by [`calc_path`], in s-to-t order.
pub fn shortest_path_arcs(inst: &ProblemInstance, interdicted: &InterdictionSet) -> Result<Vec<ArcId>> {
    let tree = tree_for(inst, interdicted)?;
    tree.path_arcs(inst.network(), inst.sink())
        .ok_or(SpniError::Unreachable)
}

/// Post-interdiction label of every node. Nodes unreachable from s get the
/// label upper bound `|N| * max(c + d)` instead of a sentinel.
pub fn all_labels(inst: &ProblemInstance, interdicted: &InterdictionSet) -> Result<Vec<i64>> {
    let tree = tree_for(inst, interdicted)?;
    let ub = pi_upper_bound(inst);
    Ok(tree.dist.into_iter().map(|d| d.unwrap_or(ub)).collect())
}

/// Whether the subgraph induced by `nodes` is connected once directions are
/// ignored. Empty sets and sets with out-of-range ids are not connected.
pub fn is_weakly_connected(net: &Network, nodes: &[NodeId]) -> bool {
    if nodes.is_empty() || nodes.iter().any(|&v| v >= net.node_count()) {
        return false;
    }
    let mut inside = vec![false; net.node_count()];
    for &v in nodes {
        inside[v] = true;
    }
    let target = inside.iter().filter(|&&b| b).count();
    let mut seen = vec![false; net.node_count()];
    let mut queue = VecDeque::from([nodes[0]]);
    seen[nodes[0]] = true;
    let mut reached = 1;
    while let Some(u) = queue.pop_front() {
        let out = net.out_arcs(u).iter().map(|&k| net.arc(k).head);
        let inc = net.in_arcs(u).iter().map(|&k| net.arc(k).tail);
        for w in out.chain(inc) {
            if inside[w] && !seen[w] {
                seen[w] = true;
                reached += 1;
                queue.push_back(w);
            }
        }
    }
    reached == target
}
