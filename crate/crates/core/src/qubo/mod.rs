//! Quadratic unconstrained binary forms for the interdiction problem.
//!
//! [`Qubo`] is the raw integer form with a registry naming what each bit
//! encodes. [`InterdictionQubo`] wraps it together with the penalty
//! expressions needed to decode an assignment back into `(x, pi)` and report
//! per-constraint residuals.
//!
//! Export format, one item per line, decimal integers, single spaces:
//!
//! ```text
//! # spni-qubo
//! # sense max
//! # var_count 21
//! # offset 0
//! # var 0 pi 1 0 1
//! # var 8 x 0
//! 0 0 -31
//! 0 1 64
//! ```
//!
//! Data lines are `i j coeff` with `i <= j`; `i == j` is a linear term. With
//! sense `min` every coefficient and the offset are negated.

mod build;
mod encoding;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Result, SpniError};
use crate::graph::{ArcId, NodeId, ProblemInstance};

pub use build::{
    build_full_qubo, build_sub_qubo, decode, ConstraintKind, Decoded, InterdictionQubo, LinearExpr,
};
pub use encoding::{encode_bounded, IntegerEncoding};

/// Upper bound on any post-interdiction label: `|N| * max_k (c_k + d_k)`.
pub fn pi_upper_bound(inst: &ProblemInstance) -> i64 {
    inst.node_count() as i64 * inst.network().max_interdicted_length()
}

/// Penalty weight large enough that any violated constraint costs more than
/// the largest possible objective.
pub fn default_penalty(inst: &ProblemInstance) -> i64 {
    pi_upper_bound(inst) + 1
}

/// What a binary variable stands for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VarRole {
    /// Interdiction indicator `x_k`.
    Interdict { arc: ArcId },
    /// One bit of the label `pi_i`, contributing `weight`.
    Label { node: NodeId, bit: usize, weight: i64 },
    /// One bit of the slack `m_k` of arc `k`.
    ArcSlack { arc: ArcId, bit: usize, weight: i64 },
    /// One bit of the budget slack `n`.
    BudgetSlack { bit: usize, weight: i64 },
}

impl fmt::Display for VarRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            VarRole::Interdict { arc } => write!(f, "x {arc}"),
            VarRole::Label { node, bit, weight } => write!(f, "pi {node} {bit} {weight}"),
            VarRole::ArcSlack { arc, bit, weight } => write!(f, "m {arc} {bit} {weight}"),
            VarRole::BudgetSlack { bit, weight } => write!(f, "n {bit} {weight}"),
        }
    }
}

impl FromStr for VarRole {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split_whitespace().collect();
        let num = |i: usize| -> std::result::Result<i64, String> {
            parts
                .get(i)
                .ok_or_else(|| format!("role `{s}` is missing a field"))?
                .parse::<i64>()
                .map_err(|e| format!("role `{s}`: {e}"))
        };
        let idx = |i: usize| num(i).map(|v| v as usize);
        let expected = match parts.first() {
            Some(&"x") => 2,
            Some(&"pi") | Some(&"m") => 4,
            Some(&"n") => 3,
            _ => return Err(format!("unknown role `{s}`")),
        };
        if parts.len() != expected {
            return Err(format!("role `{s}` has {} fields, expected {expected}", parts.len()));
        }
        Ok(match parts[0] {
            "x" => VarRole::Interdict { arc: idx(1)? },
            "pi" => VarRole::Label {
                node: idx(1)?,
                bit: idx(2)?,
                weight: num(3)?,
            },
            "m" => VarRole::ArcSlack {
                arc: idx(1)?,
                bit: idx(2)?,
                weight: num(3)?,
            },
            _ => VarRole::BudgetSlack {
                bit: idx(1)?,
                weight: num(2)?,
            },
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Maximize => "max",
            Sense::Minimize => "min",
        })
    }
}

impl FromStr for Sense {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "max" => Ok(Sense::Maximize),
            "min" => Ok(Sense::Minimize),
            other => Err(format!("unknown sense `{other}` (expected max or min)")),
        }
    }
}

/// Sparse integer quadratic form `constant + sum_i l_i b_i + sum_{i<j} q_ij b_i b_j`,
/// to be maximized. Zero coefficients are never stored.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Qubo {
    var_count: usize,
    linear: BTreeMap<usize, i64>,
    quadratic: BTreeMap<(usize, usize), i64>,
    constant: i64,
    registry: Vec<Option<VarRole>>,
}

impl Qubo {
    pub fn new(var_count: usize) -> Self {
        Self {
            var_count,
            registry: vec![None; var_count],
            ..Self::default()
        }
    }

    /// Appends a variable and returns its index.
    pub fn add_var(&mut self, role: VarRole) -> usize {
        self.registry.push(Some(role));
        self.var_count += 1;
        self.var_count - 1
    }

    pub fn var_count(&self) -> usize {
        self.var_count
    }

    pub fn constant(&self) -> i64 {
        self.constant
    }

    pub fn linear(&self) -> &BTreeMap<usize, i64> {
        &self.linear
    }

    pub fn quadratic(&self) -> &BTreeMap<(usize, usize), i64> {
        &self.quadratic
    }

    pub fn role(&self, var: usize) -> Option<VarRole> {
        self.registry.get(var).copied().flatten()
    }

    pub fn registry(&self) -> &[Option<VarRole>] {
        &self.registry
    }

    pub fn add_constant(&mut self, c: i64) {
        self.constant += c;
    }

    pub fn add_linear(&mut self, var: usize, c: i64) {
        assert!(var < self.var_count, "variable {var} out of range");
        if c == 0 {
            return;
        }
        let e = self.linear.entry(var).or_insert(0);
        *e += c;
        if *e == 0 {
            self.linear.remove(&var);
        }
    }

    /// Adds `c * b_i * b_j`; `i == j` folds into the linear term since `b^2 = b`.
    pub fn add_quadratic(&mut self, i: usize, j: usize, c: i64) {
        if i == j {
            return self.add_linear(i, c);
        }
        assert!(i < self.var_count && j < self.var_count, "variable out of range");
        if c == 0 {
            return;
        }
        let key = (i.min(j), i.max(j));
        let e = self.quadratic.entry(key).or_insert(0);
        *e += c;
        if *e == 0 {
            self.quadratic.remove(&key);
        }
    }

    /// Adds `scale * expr^2`.
    pub fn add_scaled_square(&mut self, expr: &LinearExpr, scale: i64) {
        let a = expr.constant;
        self.add_constant(scale * a * a);
        let terms: Vec<(usize, i64)> = expr.terms.iter().map(|(&v, &c)| (v, c)).collect();
        for (idx, &(v, c)) in terms.iter().enumerate() {
            self.add_linear(v, scale * (2 * a * c + c * c));
            for &(w, e) in &terms[idx + 1..] {
                self.add_quadratic(v, w, scale * 2 * c * e);
            }
        }
    }

    pub fn add_expr(&mut self, expr: &LinearExpr, scale: i64) {
        self.add_constant(scale * expr.constant);
        for (&v, &c) in &expr.terms {
            self.add_linear(v, scale * c);
        }
    }

    pub fn evaluate(&self, bits: &[bool]) -> i64 {
        assert_eq!(bits.len(), self.var_count, "assignment length mismatch");
        let lin: i64 = self
            .linear
            .iter()
            .filter(|(&v, _)| bits[v])
            .map(|(_, &c)| c)
            .sum();
        let quad: i64 = self
            .quadratic
            .iter()
            .filter(|(&(i, j), _)| bits[i] && bits[j])
            .map(|(_, &c)| c)
            .sum();
        self.constant + lin + quad
    }

    /// Same form with every coefficient and the constant negated.
    pub fn negated(&self) -> Self {
        Self {
            var_count: self.var_count,
            linear: self.linear.iter().map(|(&k, &v)| (k, -v)).collect(),
            quadratic: self.quadratic.iter().map(|(&k, &v)| (k, -v)).collect(),
            constant: -self.constant,
            registry: self.registry.clone(),
        }
    }

    /// Per-variable list of `(neighbour, q_ij)`.
    pub fn couplings(&self) -> Vec<Vec<(usize, i64)>> {
        let mut adj = vec![Vec::new(); self.var_count];
        for (&(i, j), &c) in &self.quadratic {
            adj[i].push((j, c));
            adj[j].push((i, c));
        }
        adj
    }

    /// Serializes in the export format; `Minimize` negates.
    pub fn to_export_string(&self, sense: Sense) -> String {
        use std::fmt::Write;
        let q = match sense {
            Sense::Maximize => self.clone(),
            Sense::Minimize => self.negated(),
        };
        let mut out = String::new();
        writeln!(out, "# spni-qubo").unwrap();
        writeln!(out, "# sense {sense}").unwrap();
        writeln!(out, "# var_count {}", q.var_count).unwrap();
        writeln!(out, "# offset {}", q.constant).unwrap();
        for (v, role) in q.registry.iter().enumerate() {
            if let Some(role) = role {
                writeln!(out, "# var {v} {role}").unwrap();
            }
        }
        let mut terms: BTreeMap<(usize, usize), i64> = q.quadratic.clone();
        for (&v, &c) in &q.linear {
            terms.insert((v, v), c);
        }
        for ((i, j), c) in terms {
            writeln!(out, "{i} {j} {c}").unwrap();
        }
        out
    }

    /// Parses the export format, returning the coefficients exactly as
    /// written together with the declared sense.
    pub fn from_export_str(text: &str) -> Result<(Self, Sense)> {
        let mut sense = Sense::Maximize;
        let mut var_count: Option<usize> = None;
        let mut offset = 0i64;
        let mut roles: Vec<(usize, VarRole)> = Vec::new();
        let mut terms: Vec<(usize, usize, i64)> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let err = |message: String| SpniError::Parse {
                line: lineno + 1,
                column: 1,
                message,
            };
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                let comment = comment.trim();
                let (key, rest) = comment.split_once(' ').unwrap_or((comment, ""));
                match key {
                    "sense" => sense = rest.trim().parse().map_err(err)?,
                    "var_count" => {
                        var_count = Some(rest.trim().parse().map_err(|e| err(format!("var_count: {e}")))?)
                    }
                    "offset" => offset = rest.trim().parse().map_err(|e| err(format!("offset: {e}")))?,
                    "var" => {
                        let (idx, role) = rest
                            .trim()
                            .split_once(' ')
                            .ok_or_else(|| err("var line needs an index and a role".into()))?;
                        let idx: usize = idx.parse().map_err(|e| err(format!("var index: {e}")))?;
                        roles.push((idx, role.parse().map_err(err)?));
                    }
                    _ => {}
                }
                continue;
            }
            let fields: Vec<&str> = line.split(' ').collect();
            if fields.len() != 3 {
                return Err(err(format!("expected `i j coeff`, got `{line}`")));
            }
            let i: usize = fields[0].parse().map_err(|e| err(format!("i: {e}")))?;
            let j: usize = fields[1].parse().map_err(|e| err(format!("j: {e}")))?;
            let c: i64 = fields[2].parse().map_err(|e| err(format!("coeff: {e}")))?;
            if i > j {
                return Err(err(format!("term {i} {j} is not upper triangular")));
            }
            terms.push((i, j, c));
        }
        let var_count = var_count.ok_or_else(|| SpniError::Parse {
            line: 0,
            column: 0,
            message: "missing `# var_count` header".into(),
        })?;
        let mut q = Qubo::new(var_count);
        q.constant = offset;
        for (idx, role) in roles {
            let slot = q.registry.get_mut(idx).ok_or_else(|| {
                SpniError::InvalidInput(format!("registry index {idx} >= var_count {var_count}"))
            })?;
            *slot = Some(role);
        }
        for (i, j, c) in terms {
            if j >= var_count {
                return Err(SpniError::InvalidInput(format!(
                    "term {i} {j} references a variable >= var_count {var_count}"
                )));
            }
            q.add_quadratic(i, j, c);
        }
        Ok((q, sense))
    }
}

pub fn export_qubo(q: &Qubo, path: impl AsRef<Path>, sense: Sense) -> Result<()> {
    fs::write(path, q.to_export_string(sense))?;
    Ok(())
}

pub fn import_qubo(path: impl AsRef<Path>) -> Result<(Qubo, Sense)> {
    Qubo::from_export_str(&fs::read_to_string(path)?)
}

/// Largest variable count accepted by [`for_each_assignment`].
pub const MAX_EXHAUSTIVE_BITS: usize = 30;

/// Visits all `2^var_count` assignments in Gray-code order with their
/// values, updating the value incrementally per flipped bit.
pub fn for_each_assignment<F: FnMut(&[bool], i64)>(q: &Qubo, mut visit: F) -> Result<()> {
    let n = q.var_count();
    if n > MAX_EXHAUSTIVE_BITS {
        return Err(SpniError::Capacity(format!(
            "{n} variables exceeds the exhaustive limit of {MAX_EXHAUSTIVE_BITS}"
        )));
    }
    let adj = q.couplings();
    // field[i] = l_i + sum_j q_ij b_j, the gain from setting b_i.
    let mut field: Vec<i64> = (0..n).map(|v| q.linear.get(&v).copied().unwrap_or(0)).collect();
    let mut bits = vec![false; n];
    let mut value = q.constant();
    visit(&bits, value);
    for step in 1u64..(1u64 << n) {
        let v = step.trailing_zeros() as usize;
        let sign = if bits[v] { -1 } else { 1 };
        value += sign * field[v];
        bits[v] = !bits[v];
        for &(w, c) in &adj[v] {
            field[w] += sign * c;
        }
        visit(&bits, value);
    }
    Ok(())
}
