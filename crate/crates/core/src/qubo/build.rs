use std::collections::BTreeMap;

use super::{encode_bounded, pi_upper_bound, Qubo, VarRole};
use crate::error::{Result, SpniError};
use crate::graph::{ArcId, InterdictionSet, NodeId, ProblemInstance};
use crate::subsolvers::SubproblemSpec;

/// `constant + sum coeff * b_var` over binary variables.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LinearExpr {
    pub constant: i64,
    pub terms: BTreeMap<usize, i64>,
}

impl LinearExpr {
    pub fn constant(c: i64) -> Self {
        Self {
            constant: c,
            terms: BTreeMap::new(),
        }
    }

    pub fn plus(mut self, var: usize, c: i64) -> Self {
        self.add_term(var, c);
        self
    }

    pub fn add_term(&mut self, var: usize, c: i64) {
        let e = self.terms.entry(var).or_insert(0);
        *e += c;
        if *e == 0 {
            self.terms.remove(&var);
        }
    }

    /// `self += scale * other`
    pub fn add_scaled(&mut self, other: &LinearExpr, scale: i64) {
        self.constant += scale * other.constant;
        for (&v, &c) in &other.terms {
            self.add_term(v, scale * c);
        }
    }

    pub fn evaluate(&self, bits: &[bool]) -> i64 {
        self.constant
            + self
                .terms
                .iter()
                .filter(|(&v, _)| bits[v])
                .map(|(_, &c)| c)
                .sum::<i64>()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum ConstraintKind {
    /// `c_k - (m_k + pi_j - pi_i - d_k x_k) = 0` for arc `k = (i, j)`.
    Arc(ArcId),
    /// `budget - (n + sum x) = 0`.
    Budget,
}

/// A penalty-form QUBO for the full problem or one subproblem, with the
/// bookkeeping to decode assignments.
#[derive(Clone, Debug)]
pub struct InterdictionQubo {
    qubo: Qubo,
    sink: NodeId,
    penalty: i64,
    budget: i64,
    objective: LinearExpr,
    labels: BTreeMap<NodeId, LinearExpr>,
    interdict_vars: Vec<(ArcId, usize)>,
    budget_slack: LinearExpr,
    constraints: Vec<(ConstraintKind, LinearExpr)>,
}

/// `(variable, bit index, weight)` of one encoded bit.
type BitSlot = (usize, usize, i64);

impl InterdictionQubo {
    pub fn qubo(&self) -> &Qubo {
        &self.qubo
    }

    pub fn into_qubo(self) -> Qubo {
        self.qubo
    }

    pub fn sink(&self) -> NodeId {
        self.sink
    }

    pub fn penalty(&self) -> i64 {
        self.penalty
    }

    pub fn budget(&self) -> i64 {
        self.budget
    }

    pub fn var_count(&self) -> usize {
        self.qubo.var_count()
    }

    /// The unpenalized objective `pi_sink` as an expression over the bits.
    pub fn objective(&self) -> &LinearExpr {
        &self.objective
    }

    /// Free label expressions by node (the source, when in scope, is the constant 0).
    pub fn labels(&self) -> &BTreeMap<NodeId, LinearExpr> {
        &self.labels
    }

    /// `(arc, variable)` pairs for the interdiction indicators.
    pub fn interdict_vars(&self) -> &[(ArcId, usize)] {
        &self.interdict_vars
    }

    pub fn constraints(&self) -> &[(ConstraintKind, LinearExpr)] {
        &self.constraints
    }

    pub fn evaluate(&self, bits: &[bool]) -> i64 {
        self.qubo.evaluate(bits)
    }

    /// Variable vector for given decoded values; `None` if a value is outside
    /// its encoding range. Slack values are read off the residual equations.
    pub fn encode_assignment(
        &self,
        interdicted: &InterdictionSet,
        labels: &BTreeMap<NodeId, i64>,
        arc_slack: &BTreeMap<ArcId, i64>,
        budget_slack: i64,
    ) -> Option<Vec<bool>> {
        let mut bits = vec![false; self.var_count()];
        let mut groups: BTreeMap<(u8, usize), Vec<BitSlot>> = BTreeMap::new();
        for (v, role) in self.qubo.registry().iter().enumerate() {
            match (*role)? {
                VarRole::Interdict { arc } => bits[v] = interdicted.contains(arc),
                VarRole::Label { node, bit, weight } => {
                    groups.entry((0, node)).or_default().push((v, bit, weight))
                }
                VarRole::ArcSlack { arc, bit, weight } => {
                    groups.entry((1, arc)).or_default().push((v, bit, weight))
                }
                VarRole::BudgetSlack { bit, weight } => {
                    groups.entry((2, 0)).or_default().push((v, bit, weight))
                }
            }
        }
        for ((kind, id), vars) in groups {
            let target = match kind {
                0 => *labels.get(&id)?,
                1 => *arc_slack.get(&id)?,
                _ => budget_slack,
            };
            write_value(&mut bits, &vars, target)?;
        }
        Some(bits)
    }
}

/// Writes `target` onto the bits of one encoded integer. Binary bits have
/// weight `1 << bit`; the optional remainder bit does not.
fn write_value(bits: &mut [bool], vars: &[(usize, usize, i64)], target: i64) -> Option<()> {
    let binary_max: i64 = vars
        .iter()
        .filter(|&&(_, b, w)| w == 1 << b)
        .map(|&(_, _, w)| w)
        .sum();
    let mut rest = target;
    if rest > binary_max {
        let &(v, _, w) = vars.iter().find(|&&(_, b, w)| w != 1 << b)?;
        bits[v] = true;
        rest -= w;
    }
    if rest < 0 || rest > binary_max {
        return None;
    }
    for &(v, b, w) in vars {
        if w == 1 << b {
            bits[v] = rest >> b & 1 == 1;
        }
    }
    Some(())
}

struct Scope<'a> {
    inst: &'a ProblemInstance,
    in_scope: Vec<bool>,
    sink: NodeId,
    gamma: Option<&'a [i64]>,
    arcs: Vec<ArcId>,
    budget: i64,
}

fn build_scoped(scope: Scope<'_>, penalty: i64) -> InterdictionQubo {
    let inst = scope.inst;
    let net = inst.network();
    let source = inst.source();
    let pi_ub = pi_upper_bound(inst);
    let pi_enc = encode_bounded(pi_ub);
    let mut q = Qubo::new(0);

    let mut labels: BTreeMap<NodeId, LinearExpr> = BTreeMap::new();
    for v in (0..inst.node_count()).filter(|&v| scope.in_scope[v]) {
        let mut e = LinearExpr::constant(0);
        if v != source {
            for (bit, &w) in pi_enc.coefficients().iter().enumerate() {
                let var = q.add_var(VarRole::Label { node: v, bit, weight: w });
                e.add_term(var, w);
            }
        }
        labels.insert(v, e);
    }

    let mut interdict_vars = Vec::with_capacity(scope.arcs.len());
    for &k in &scope.arcs {
        interdict_vars.push((k, q.add_var(VarRole::Interdict { arc: k })));
    }

    let mut constraints = Vec::with_capacity(scope.arcs.len() + 1);
    for (&k, &(_, x)) in scope.arcs.iter().zip(&interdict_vars) {
        let a = net.arc(k);
        let m_enc = encode_bounded(pi_ub + a.length + a.increment);
        // c - m - pi_j + pi_i + d x
        let mut r = LinearExpr::constant(a.length);
        for (bit, &w) in m_enc.coefficients().iter().enumerate() {
            let var = q.add_var(VarRole::ArcSlack { arc: k, bit, weight: w });
            r.add_term(var, -w);
        }
        r.add_scaled(&labels[&a.head], -1);
        match labels.get(&a.tail) {
            Some(tail) => r.add_scaled(tail, 1),
            None => {
                let gamma = scope.gamma.expect("entering arcs need fixed labels");
                r.constant += gamma[a.tail];
            }
        }
        r.add_term(x, a.increment);
        constraints.push((ConstraintKind::Arc(k), r));
    }

    let mut slack = LinearExpr::constant(0);
    for (bit, &w) in encode_bounded(scope.budget).coefficients().iter().enumerate() {
        let var = q.add_var(VarRole::BudgetSlack { bit, weight: w });
        slack.add_term(var, w);
    }
    let mut budget_residual = LinearExpr::constant(scope.budget);
    budget_residual.add_scaled(&slack, -1);
    for &(_, x) in &interdict_vars {
        budget_residual.add_term(x, -1);
    }
    constraints.push((ConstraintKind::Budget, budget_residual));

    let objective = labels[&scope.sink].clone();
    q.add_expr(&objective, 1);
    for (_, r) in &constraints {
        q.add_scaled_square(r, -penalty);
    }

    InterdictionQubo {
        qubo: q,
        sink: scope.sink,
        penalty,
        budget: scope.budget,
        objective,
        labels,
        interdict_vars,
        budget_slack: slack,
        constraints,
    }
}

/// Penalty QUBO of the whole problem: maximize `pi_t` minus `P` times the
/// squared residual of every arc constraint and of the budget constraint.
/// `pi_s` is the constant 0 rather than a penalized variable.
pub fn build_full_qubo(inst: &ProblemInstance, penalty: i64) -> InterdictionQubo {
    assert!(penalty >= 1, "penalty must be positive");
    build_scoped(
        Scope {
            inst,
            in_scope: vec![true; inst.node_count()],
            sink: inst.sink(),
            gamma: None,
            arcs: (0..inst.arc_count()).collect(),
            budget: inst.budget() as i64,
        },
        penalty,
    )
}

/// Penalty QUBO of a block subproblem: labels outside the block are fixed to
/// the spec's `gamma`, only arcs entering or inside the block carry
/// variables, and the budget is the spec's local budget.
pub fn build_sub_qubo(spec: &SubproblemSpec<'_>, penalty: i64) -> Result<InterdictionQubo> {
    if penalty < 1 {
        return Err(SpniError::InvalidInput("penalty must be positive".into()));
    }
    let inst = spec.instance();
    let mut in_scope = vec![false; inst.node_count()];
    for &v in spec.block() {
        in_scope[v] = true;
    }
    if !in_scope[spec.sink()] {
        return Err(SpniError::InvalidInput(format!(
            "sink {} is not in the block",
            spec.sink()
        )));
    }
    Ok(build_scoped(
        Scope {
            inst,
            in_scope,
            sink: spec.sink(),
            gamma: Some(spec.gamma()),
            arcs: spec.arcs().to_vec(),
            budget: spec.local_budget() as i64,
        },
        penalty,
    ))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decoded {
    pub interdicted: InterdictionSet,
    pub labels: BTreeMap<NodeId, i64>,
    pub budget_slack: i64,
    pub residuals: Vec<(ConstraintKind, i64)>,
}

impl Decoded {
    pub fn is_feasible(&self) -> bool {
        self.residuals.iter().all(|&(_, r)| r == 0)
    }
}

pub fn decode(q: &InterdictionQubo, bits: &[bool]) -> Decoded {
    assert_eq!(bits.len(), q.var_count(), "assignment length mismatch");
    Decoded {
        interdicted: q
            .interdict_vars
            .iter()
            .filter(|&&(_, v)| bits[v])
            .map(|&(k, _)| k)
            .collect(),
        labels: q
            .labels
            .iter()
            .map(|(&v, e)| (v, e.evaluate(bits)))
            .collect(),
        budget_slack: q.budget_slack.evaluate(bits),
        residuals: q
            .constraints
            .iter()
            .map(|(kind, e)| (*kind, e.evaluate(bits)))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::super::{default_penalty, for_each_assignment};
    use super::*;
    use crate::graph::fixtures::{d4, p3};
    use crate::graph::{ArcSpec, Network};
    use crate::instance::generate_grid;
    use crate::subsolvers::make_spec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pi_bounds_and_penalty() {
        assert_eq!(pi_upper_bound(&p3()), 15);
        assert_eq!(default_penalty(&p3()), 16);

        let g = generate_grid(3, 3, 0).unwrap();
        let arcs = g
            .network()
            .arcs()
            .iter()
            .map(|a| {
                if a.length == 0 {
                    *a
                } else {
                    ArcSpec::new(a.tail, a.head, 10, 10)
                }
            })
            .collect();
        let g = ProblemInstance::new(Network::new(11, arcs), g.source(), g.sink(), 0).unwrap();
        assert_eq!(pi_upper_bound(&g), 220);
        assert_eq!(default_penalty(&g), 221);

        let zero = ProblemInstance::new(Network::new(2, vec![ArcSpec::new(0, 1, 0, 0)]), 0, 1, 0).unwrap();
        assert_eq!(pi_upper_bound(&zero), 0);
        assert_eq!(default_penalty(&zero), 1);
    }

    #[test]
    fn p3_variable_count() {
        let q = build_full_qubo(&p3(), 16);
        assert_eq!(q.var_count(), 21);
    }

    fn p3_optimum_bits(q: &InterdictionQubo) -> Vec<bool> {
        let labels = BTreeMap::from([(0, 0), (1, 5), (2, 9)]);
        let slack = BTreeMap::from([(0, 0), (1, 0)]);
        q.encode_assignment(&InterdictionSet::from([0]), &labels, &slack, 0)
            .unwrap()
    }

    #[test]
    fn p3_feasible_assignment_scores_nine() {
        let q = build_full_qubo(&p3(), 16);
        let bits = p3_optimum_bits(&q);
        assert_eq!(q.evaluate(&bits), 9);
        let d = decode(&q, &bits);
        assert!(d.is_feasible());
        assert_eq!(d.interdicted, InterdictionSet::from([0]));
        assert_eq!(d.labels[&2], 9);
    }

    #[test]
    fn all_zero_bits_decode() {
        let q = build_full_qubo(&p3(), 16);
        let d = decode(&q, &[false; 21]);
        assert!(d.interdicted.is_empty());
        assert!(d.labels.values().all(|&v| v == 0));
        let budget = d.residuals.iter().find(|(k, _)| *k == ConstraintKind::Budget).unwrap();
        assert_eq!(budget.1, 1);
    }

    #[test]
    fn flipping_a_label_bit_breaks_feasibility() {
        let q = build_full_qubo(&p3(), 16);
        let base = p3_optimum_bits(&q);
        for (v, role) in q.qubo().registry().iter().enumerate() {
            if let Some(VarRole::Label { .. }) = role {
                let mut bits = base.clone();
                bits[v] = !bits[v];
                assert!(!decode(&q, &bits).is_feasible(), "flip of var {v}");
            }
        }
    }

    #[test]
    fn random_feasible_assignments_are_fragile() {
        // feasible points: any x within budget, labels = any values below the
        // shortest-path labels, slacks from the residual equations
        let inst = generate_grid(2, 2, 3).unwrap().with_budget(1).unwrap();
        let q = build_full_qubo(&inst, default_penalty(&inst));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let k = rng.gen_range(0..inst.arc_count());
            let x = InterdictionSet::from([k]);
            let labels: BTreeMap<NodeId, i64> = crate::graph::all_labels(&inst, &x)
                .unwrap()
                .into_iter()
                .enumerate()
                .collect();
            let slack: BTreeMap<ArcId, i64> = inst
                .network()
                .arcs()
                .iter()
                .enumerate()
                .map(|(id, a)| {
                    let d = if x.contains(id) { a.increment } else { 0 };
                    (id, a.length + labels[&a.tail] + d - labels[&a.head])
                })
                .collect();
            let bits = q.encode_assignment(&x, &labels, &slack, 0).unwrap();
            assert!(decode(&q, &bits).is_feasible());
            let label_vars: Vec<usize> = (0..q.var_count())
                .filter(|&v| matches!(q.qubo().role(v), Some(VarRole::Label { .. })))
                .collect();
            let v = label_vars[rng.gen_range(0..label_vars.len())];
            let mut flipped = bits.clone();
            flipped[v] = !flipped[v];
            assert!(!decode(&q, &flipped).is_feasible());
            assert!(q.evaluate(&flipped) < q.evaluate(&bits));
        }
    }

    #[test]
    fn full_equals_sub_on_whole_graph() {
        for inst in [p3(), d4()] {
            let block: Vec<NodeId> = (0..inst.node_count()).collect();
            let spec = make_spec(&inst, &block, inst.sink(), &InterdictionSet::new()).unwrap();
            let p = default_penalty(&inst);
            let full = build_full_qubo(&inst, p);
            let sub = build_sub_qubo(&spec, p).unwrap();
            assert_eq!(full.qubo(), sub.qubo());
        }
    }

    #[test]
    fn sub_qubo_exhaustive_p3() {
        let inst = p3();
        let spec = make_spec(&inst, &[1, 2], 2, &InterdictionSet::new()).unwrap();
        let q = build_sub_qubo(&spec, default_penalty(&inst)).unwrap();
        let (best, bits) = exhaustive_best(&q);
        assert_eq!(best, 9);
        let d = decode(&q, &bits);
        assert!(d.is_feasible());
        assert_eq!(d.interdicted, InterdictionSet::from([0]));
        assert_eq!(d.labels[&2], 9);

        let zero = ProblemInstance::new(inst.network().clone(), 0, 2, 0).unwrap();
        let spec = make_spec(&zero, &[1, 2], 2, &InterdictionSet::new()).unwrap();
        let q = build_sub_qubo(&spec, default_penalty(&zero)).unwrap();
        let (best, bits) = exhaustive_best(&q);
        assert_eq!(best, 6);
        assert!(decode(&q, &bits).interdicted.is_empty());
    }

    fn exhaustive_best(q: &InterdictionQubo) -> (i64, Vec<bool>) {
        let mut best = (i64::MIN, Vec::new());
        for_each_assignment(q.qubo(), |bits, v| {
            if v > best.0 {
                best = (v, bits.to_vec());
            }
        })
        .unwrap();
        best
    }
}
