//! Instance construction: the grid generator, validation and the JSON
//! instance file format.
//!
//! File layout (arc order is significant, arc ids are list positions):
//!
//! ```json
//! {"node_count": 3, "arcs": [[0,1,2,3],[1,2,4,1]], "source": 0, "sink": 2, "budget": 1}
//! ```

use std::fmt;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpniError};
use crate::graph::{ArcSpec, Network, NodeId, ProblemInstance};

/// Interior arc weights are drawn uniformly from this closed range.
pub const WEIGHT_RANGE: (i64, i64) = (1, 10);

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    TooFewNodes(usize),
    NodeOutOfRange { arc: usize, node: i64 },
    NegativeLength { arc: usize, value: i64 },
    NegativeIncrement { arc: usize, value: i64 },
    SourceOutOfRange(i64),
    SinkOutOfRange(i64),
    SourceIsSink(NodeId),
    NegativeBudget(i64),
    BudgetExceedsArcCount { budget: usize, arcs: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TooFewNodes(n) => write!(f, "node count {n} is below 2"),
            Violation::NodeOutOfRange { arc, node } => {
                write!(f, "node id out of range: arc {arc} references node {node}")
            }
            Violation::NegativeLength { arc, value } => {
                write!(f, "negative length {value} on arc {arc}")
            }
            Violation::NegativeIncrement { arc, value } => {
                write!(f, "negative interdiction increment {value} on arc {arc}")
            }
            Violation::SourceOutOfRange(v) => write!(f, "node id out of range: source {v}"),
            Violation::SinkOutOfRange(v) => write!(f, "node id out of range: sink {v}"),
            Violation::SourceIsSink(v) => write!(f, "source and sink are both node {v}"),
            Violation::NegativeBudget(b) => write!(f, "negative budget {b}"),
            Violation::BudgetExceedsArcCount { budget, arcs } => {
                write!(f, "budget exceeds arc count ({budget} > {arcs})")
            }
        }
    }
}

/// Every invariant violation of `inst`; empty means valid.
pub fn validate(inst: &ProblemInstance) -> Vec<Violation> {
    let net = inst.network();
    let n = net.node_count();
    let mut out = Vec::new();
    if n < 2 {
        out.push(Violation::TooFewNodes(n));
    }
    for (k, a) in net.arcs().iter().enumerate() {
        for node in [a.tail, a.head] {
            if node >= n {
                out.push(Violation::NodeOutOfRange {
                    arc: k,
                    node: node as i64,
                });
            }
        }
        if a.length < 0 {
            out.push(Violation::NegativeLength {
                arc: k,
                value: a.length,
            });
        }
        if a.increment < 0 {
            out.push(Violation::NegativeIncrement {
                arc: k,
                value: a.increment,
            });
        }
    }
    if inst.source() >= n {
        out.push(Violation::SourceOutOfRange(inst.source() as i64));
    }
    if inst.sink() >= n {
        out.push(Violation::SinkOutOfRange(inst.sink() as i64));
    }
    if inst.source() == inst.sink() {
        out.push(Violation::SourceIsSink(inst.source()));
    }
    if inst.budget() > net.arc_count() {
        out.push(Violation::BudgetExceedsArcCount {
            budget: inst.budget(),
            arcs: net.arc_count(),
        });
    }
    out
}

/// Node ids of the generated grid: s = 0, cell (r, c) = 1 + r*cols + c, t = rows*cols + 1.
pub fn grid_node(cols: usize, r: usize, c: usize) -> NodeId {
    1 + r * cols + c
}

/// Layered grid instance with budget 0.
///
/// s feeds every first-column node and every last-column node feeds t, all
/// with length and increment 0. Horizontal arcs point right, vertical arcs
/// point down. Each interior arc draws its length then its increment from
/// ChaCha8 seeded with `seed`, uniform on [`WEIGHT_RANGE`].
///
/// Arc order: the `rows` source arcs, then row-major over cells the right
/// arc followed by the down arc, then the `rows` sink arcs.
pub fn generate_grid(rows: usize, cols: usize, seed: u64) -> Result<ProblemInstance> {
    if rows < 2 || cols < 2 {
        return Err(SpniError::InvalidInput(format!(
            "grid needs at least 2 rows and 2 columns, got {rows}x{cols}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = WEIGHT_RANGE;
    let mut draw = |tail, head| {
        let c = rng.gen_range(lo..=hi);
        let d = rng.gen_range(lo..=hi);
        ArcSpec::new(tail, head, c, d)
    };
    let source = 0;
    let sink = rows * cols + 1;
    let mut arcs = Vec::with_capacity(2 * rows * cols + rows);
    for r in 0..rows {
        arcs.push(ArcSpec::new(source, grid_node(cols, r, 0), 0, 0));
    }
    for r in 0..rows {
        for c in 0..cols {
            let here = grid_node(cols, r, c);
            if c + 1 < cols {
                arcs.push(draw(here, grid_node(cols, r, c + 1)));
            }
            if r + 1 < rows {
                arcs.push(draw(here, grid_node(cols, r + 1, c)));
            }
        }
    }
    for r in 0..rows {
        arcs.push(ArcSpec::new(grid_node(cols, r, cols - 1), sink, 0, 0));
    }
    ProblemInstance::new(Network::new(rows * cols + 2, arcs), source, sink, 0)
}

/// `max(1, round(fraction * arc_count))`, capped at the arc count.
pub fn budget_from_fraction(arc_count: usize, fraction: f64) -> usize {
    let raw = (fraction * arc_count as f64).round().max(0.0) as usize;
    raw.max(1).min(arc_count)
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    node_count: i64,
    arcs: Vec<[i64; 4]>,
    source: i64,
    sink: i64,
    budget: i64,
}

impl InstanceFile {
    fn from_instance(inst: &ProblemInstance) -> Self {
        let net = inst.network();
        Self {
            node_count: net.node_count() as i64,
            arcs: net
                .arcs()
                .iter()
                .map(|a| [a.tail as i64, a.head as i64, a.length, a.increment])
                .collect(),
            source: inst.source() as i64,
            sink: inst.sink() as i64,
            budget: inst.budget() as i64,
        }
    }

    fn into_instance(self) -> Result<ProblemInstance> {
        let mut violations = Vec::new();
        let node_count = if self.node_count < 0 {
            violations.push(Violation::TooFewNodes(0));
            0
        } else {
            self.node_count as usize
        };
        let mut arcs = Vec::with_capacity(self.arcs.len());
        for (k, [t, h, c, d]) in self.arcs.into_iter().enumerate() {
            let mut endpoint = |v: i64| {
                if v < 0 {
                    violations.push(Violation::NodeOutOfRange { arc: k, node: v });
                    usize::MAX
                } else {
                    v as usize
                }
            };
            let (tail, head) = (endpoint(t), endpoint(h));
            arcs.push(ArcSpec::new(tail, head, c, d));
        }
        let source = if self.source < 0 {
            violations.push(Violation::SourceOutOfRange(self.source));
            usize::MAX
        } else {
            self.source as usize
        };
        let sink = if self.sink < 0 {
            violations.push(Violation::SinkOutOfRange(self.sink));
            usize::MAX
        } else {
            self.sink as usize
        };
        let budget = if self.budget < 0 {
            violations.push(Violation::NegativeBudget(self.budget));
            0
        } else {
            self.budget as usize
        };
        let inst = ProblemInstance::new_unchecked(Network::new(node_count, arcs), source, sink, budget);
        // usize::MAX placeholders were already reported above.
        violations.extend(validate(&inst).into_iter().filter(|v| {
            !matches!(
                v,
                Violation::NodeOutOfRange { node, .. } if *node == usize::MAX as i64
            ) && !matches!(v, Violation::SourceOutOfRange(x) | Violation::SinkOutOfRange(x) if *x == usize::MAX as i64)
        }));
        if violations.is_empty() {
            Ok(inst)
        } else {
            Err(SpniError::InvalidInstance(violations))
        }
    }
}

pub fn instance_to_string(inst: &ProblemInstance) -> String {
    let mut s = serde_json::to_string(&InstanceFile::from_instance(inst))
        .expect("instance serialization cannot fail");
    s.push('\n');
    s
}

pub fn instance_from_str(text: &str) -> Result<ProblemInstance> {
    let raw: InstanceFile = serde_json::from_str(text).map_err(|e| SpniError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    raw.into_instance()
}

pub fn write_instance(inst: &ProblemInstance, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, instance_to_string(inst))?;
    Ok(())
}

pub fn read_instance(path: impl AsRef<Path>) -> Result<ProblemInstance> {
    instance_from_str(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::p3;
    use crate::graph::{calc_length, InterdictionSet};

    #[test]
    fn grid_counts() {
        let g = generate_grid(3, 3, 7).unwrap();
        assert_eq!(g.node_count(), 11);
        assert_eq!(g.arc_count(), 18);
        assert_eq!(g.arc_count(), 2 * (g.node_count() - 2));

        let g = generate_grid(2, 2, 0).unwrap();
        assert_eq!((g.node_count(), g.arc_count()), (6, 8));

        let g = generate_grid(3, 5, 0).unwrap();
        assert_eq!(g.arc_count(), 2 * 3 * 5 + 3 - 5);
    }

    #[test]
    fn grid_weights_and_determinism() {
        let a = generate_grid(4, 4, 42).unwrap();
        let b = generate_grid(4, 4, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate_grid(4, 4, 43).unwrap());
        for arc in a.network().arcs() {
            if arc.tail == a.source() || arc.head == a.sink() {
                assert_eq!((arc.length, arc.increment), (0, 0));
            } else {
                assert!((1..=10).contains(&arc.length));
                assert!((1..=10).contains(&arc.increment));
            }
        }
        assert!(calc_length(&a, &InterdictionSet::new()).unwrap().is_reachable());
    }

    #[test]
    fn grid_rejects_thin() {
        assert!(generate_grid(1, 3, 0).is_err());
        assert!(generate_grid(3, 1, 0).is_err());
    }

    #[test]
    fn validate_examples() {
        assert!(validate(&p3()).is_empty());

        let over = ProblemInstance::new_unchecked(p3().network().clone(), 0, 2, 3);
        let v = validate(&over);
        assert_eq!(v.len(), 1);
        assert!(v[0].to_string().contains("budget exceeds arc count"));

        let net = Network::new(3, vec![ArcSpec::new(0, 3, 1, 1), ArcSpec::new(0, 2, -1, 1)]);
        let bad = ProblemInstance::new_unchecked(net, 0, 0, 5);
        let v = validate(&bad);
        assert!(v[0].to_string().contains("node id out of range"));
        assert_eq!(v.len(), 4, "{v:?}");
    }

    #[test]
    fn file_round_trip() {
        let text = instance_to_string(&p3());
        assert_eq!(
            text,
            "{\"node_count\":3,\"arcs\":[[0,1,2,3],[1,2,4,1]],\"source\":0,\"sink\":2,\"budget\":1}\n"
        );
        assert_eq!(instance_from_str(&text).unwrap(), p3());
    }

    #[test]
    fn missing_budget_names_field() {
        let err = instance_from_str(r#"{"node_count":3,"arcs":[[0,1,2,3]],"source":0,"sink":2}"#)
            .unwrap_err();
        match err {
            SpniError::Parse { message, line, .. } => {
                assert!(message.contains("budget"), "{message}");
                assert_eq!(line, 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn negative_increment_is_validation_error() {
        let err = instance_from_str(
            r#"{"node_count":3,"arcs":[[0,1,2,-3],[1,2,4,1]],"source":0,"sink":2,"budget":1}"#,
        )
        .unwrap_err();
        match err {
            SpniError::InvalidInstance(v) => {
                assert_eq!(v, vec![Violation::NegativeIncrement { arc: 0, value: -3 }])
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn negative_ids_reported_once() {
        let err = instance_from_str(
            r#"{"node_count":3,"arcs":[[-1,1,2,3]],"source":0,"sink":-2,"budget":-1}"#,
        )
        .unwrap_err();
        match err {
            SpniError::InvalidInstance(v) => assert_eq!(v.len(), 3, "{v:?}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn budget_fraction_floor() {
        assert_eq!(budget_from_fraction(18, 0.0025), 1);
        assert_eq!(budget_from_fraction(800, 0.0025), 2);
        assert_eq!(budget_from_fraction(0, 0.5), 0);
    }
}
