//! Randomized connected partitioning of a network into blocks of about `n` nodes.
//!
//! Blocks are grown breadth-first over the undirected skeleton. Each new
//! block starts from an unassigned node with the fewest unassigned
//! neighbours (random among ties), which keeps the leftovers from being
//! trapped between finished blocks. Blocks below `ceil(n/2)` are merged into
//! a random adjacent block; merged blocks above `2n` are regrown internally.

use std::collections::{BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Result, SpniError};
use crate::graph::{is_weakly_connected, Network, NodeId};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partitioning {
    blocks: Vec<Vec<NodeId>>,
    block_of: Vec<Option<usize>>,
}

impl Partitioning {
    /// Checks disjointness and ids; coverage is not required here (see
    /// [`Partitioning::find_block`]).
    pub fn from_blocks(node_count: usize, blocks: Vec<Vec<NodeId>>) -> Result<Self> {
        let mut block_of = vec![None; node_count];
        let mut sorted = Vec::with_capacity(blocks.len());
        for (b, mut block) in blocks.into_iter().enumerate() {
            block.sort_unstable();
            for &v in &block {
                let slot = block_of.get_mut(v).ok_or_else(|| {
                    SpniError::InvalidInput(format!("node {v} out of range in block {b}"))
                })?;
                if slot.replace(b).is_some() {
                    return Err(SpniError::InvalidInput(format!(
                        "node {v} appears in more than one block"
                    )));
                }
            }
            sorted.push(block);
        }
        Ok(Self {
            blocks: sorted,
            block_of,
        })
    }

    /// One block holding every node.
    pub fn single(node_count: usize) -> Self {
        Self {
            blocks: vec![(0..node_count).collect()],
            block_of: vec![Some(0); node_count],
        }
    }

    pub fn blocks(&self) -> &[Vec<NodeId>] {
        &self.blocks
    }

    pub fn block(&self, index: usize) -> &[NodeId] {
        &self.blocks[index]
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Index of the block containing `v`.
    pub fn find_block(&self, v: NodeId) -> Result<usize> {
        match self.block_of.get(v) {
            None => Err(SpniError::InvalidInput(format!(
                "node {v} out of range ({} nodes)",
                self.block_of.len()
            ))),
            Some(None) => Err(SpniError::Invariant(format!(
                "node {v} is not assigned to any block"
            ))),
            Some(Some(b)) => Ok(*b),
        }
    }
}

/// Lower block-size bound for target `n`.
pub fn min_block_size(n: usize) -> usize {
    n.div_ceil(2)
}

/// Upper block-size bound for target `n`.
pub fn max_block_size(n: usize) -> usize {
    2 * n
}

pub fn partition<R: Rng + ?Sized>(net: &Network, n: usize, rng: &mut R) -> Partitioning {
    let n = n.max(1);
    let count = net.node_count();
    let nbrs = net.undirected_neighbors();
    let all: Vec<NodeId> = (0..count).collect();

    let mut blocks = grow_regions(&all, &nbrs, n, rng);
    merge_small(&mut blocks, &nbrs, count, n, rng);

    let mut result = Vec::with_capacity(blocks.len());
    for block in blocks {
        if block.len() > max_block_size(n) {
            let mut pieces = grow_regions(&block, &nbrs, n, rng);
            merge_small(&mut pieces, &nbrs, count, n, rng);
            result.extend(pieces);
        } else {
            result.push(block);
        }
    }
    for b in &mut result {
        b.sort_unstable();
    }
    result.sort_unstable_by_key(|b| b[0]);
    Partitioning::from_blocks(count, result).expect("grown blocks are disjoint")
}

/// Region growing restricted to `members`.
fn grow_regions<R: Rng + ?Sized>(
    members: &[NodeId],
    nbrs: &[Vec<NodeId>],
    n: usize,
    rng: &mut R,
) -> Vec<Vec<NodeId>> {
    let count = nbrs.len();
    let mut inside = vec![false; count];
    for &v in members {
        inside[v] = true;
    }
    let mut free_degree = vec![0usize; count];
    for &v in members {
        free_degree[v] = nbrs[v].iter().filter(|&&w| inside[w]).count();
    }
    let mut order = members.to_vec();
    order.shuffle(rng);

    let mut assigned = vec![false; count];
    let mut queued = vec![false; count];
    let mut remaining = members.len();
    let mut blocks = Vec::new();
    let mut scratch = Vec::new();

    while remaining > 0 {
        // min free degree; earliest in the shuffled order among ties
        let seed = order
            .iter()
            .copied()
            .filter(|&v| !assigned[v])
            .min_by_key(|&v| free_degree[v])
            .expect("remaining > 0");

        let mut block = Vec::with_capacity(n);
        let mut queue = VecDeque::from([seed]);
        let mut touched = vec![seed];
        queued[seed] = true;
        while block.len() < n {
            let Some(u) = queue.pop_front() else { break };
            assigned[u] = true;
            remaining -= 1;
            block.push(u);
            scratch.clear();
            for &w in &nbrs[u] {
                if inside[w] && !assigned[w] {
                    free_degree[w] -= 1;
                    if !queued[w] {
                        scratch.push(w);
                    }
                }
            }
            scratch.shuffle(rng);
            for &w in &scratch {
                queued[w] = true;
                touched.push(w);
                queue.push_back(w);
            }
        }
        for v in touched {
            queued[v] = false;
        }
        blocks.push(block);
    }
    blocks
}

/// Folds blocks smaller than `ceil(n/2)` into an adjacent block, preferring
/// (at random) neighbours where the merged size stays within `2n`.
fn merge_small<R: Rng + ?Sized>(
    blocks: &mut Vec<Vec<NodeId>>,
    nbrs: &[Vec<NodeId>],
    count: usize,
    n: usize,
    rng: &mut R,
) {
    let min = min_block_size(n);
    let max = max_block_size(n);
    let mut owner = vec![usize::MAX; count];
    for (b, block) in blocks.iter().enumerate() {
        for &v in block {
            owner[v] = b;
        }
    }
    let mut work: Vec<usize> = (0..blocks.len()).filter(|&b| blocks[b].len() < min).collect();
    work.shuffle(rng);
    while let Some(b) = work.pop() {
        if blocks[b].is_empty() || blocks[b].len() >= min {
            continue;
        }
        let adjacent: BTreeSet<usize> = blocks[b]
            .iter()
            .flat_map(|&v| nbrs[v].iter())
            .map(|&w| owner[w])
            .filter(|&o| o != b && o != usize::MAX)
            .collect();
        if adjacent.is_empty() {
            continue;
        }
        let size = blocks[b].len();
        let fitting: Vec<usize> = adjacent
            .iter()
            .copied()
            .filter(|&o| blocks[o].len() + size <= max)
            .collect();
        let target = if fitting.is_empty() {
            *adjacent
                .iter()
                .min_by_key(|&&o| blocks[o].len())
                .expect("non-empty")
        } else {
            *fitting.choose(rng).expect("non-empty")
        };
        let moved = std::mem::take(&mut blocks[b]);
        for &v in &moved {
            owner[v] = target;
        }
        blocks[target].extend(moved);
        if blocks[target].len() < min {
            work.push(target);
        }
    }
    blocks.retain(|b| !b.is_empty());
}

/// Structural check used by tests and debug assertions: cover, disjointness,
/// weak connectivity of each block and the size window (blocks that are a
/// whole weakly connected component may be smaller).
pub fn check_partitioning(net: &Network, p: &Partitioning, n: usize) -> std::result::Result<(), String> {
    let count = net.node_count();
    let mut seen = vec![false; count];
    for (i, block) in p.blocks().iter().enumerate() {
        for &v in block {
            if v >= count || seen[v] {
                return Err(format!("block {i}: node {v} repeated or out of range"));
            }
            seen[v] = true;
        }
        if !is_weakly_connected(net, block) {
            return Err(format!("block {i} is not weakly connected: {block:?}"));
        }
        if block.len() > max_block_size(n) {
            return Err(format!("block {i} has {} > {} nodes", block.len(), max_block_size(n)));
        }
        if block.len() < min_block_size(n) && !is_whole_component(net, block) {
            return Err(format!("block {i} has {} < {} nodes", block.len(), min_block_size(n)));
        }
    }
    if let Some(v) = seen.iter().position(|s| !s) {
        return Err(format!("node {v} not covered"));
    }
    Ok(())
}

fn is_whole_component(net: &Network, block: &[NodeId]) -> bool {
    let inside: BTreeSet<NodeId> = block.iter().copied().collect();
    net.arcs()
        .iter()
        .all(|a| inside.contains(&a.tail) == inside.contains(&a.head))
}
