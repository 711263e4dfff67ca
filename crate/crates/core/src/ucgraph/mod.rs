//! Conversion graphs and unit-conversion problems.
//!
//! A [`ConversionGraph`] is a simple undirected graph over units where each
//! edge carries a rule "one `src` is `factor` `dst`" over `Z_p*`. Factors are
//! derived from hidden per-unit potentials, so every cycle multiplies to one
//! and every walk between two units converts a quantity the same way.

mod generate;
mod paths;
mod record;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::modmath::{mod_inv, traverse, Direction, ModError, Modulus, Residue};

pub use generate::{generate_graph, generate_problem, sample_problem, unit_labels, GenParams};
pub use paths::{cycle_products, enumerate_paths, solve, walk_quantity, PathResult};
pub use record::{ProblemRecord, RuleRecord};

/// Cap on graph resampling per problem before giving up.
pub const MAX_ATTEMPTS: u64 = 10_000;

/// Tokens reserved by the sequence grammar. Unit labels may not use them.
pub const RESERVED_TOKENS: &[&str] = &["R", "Q", "P", ">", ":", ";", "*", "/", "=", "#plan", "#calc", "<S>", "</S>"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("{n_edges} edges cannot connect {n_nodes} nodes")]
    InsufficientEdges { n_nodes: usize, n_edges: usize },
    #[error("{n_edges} edges exceed the simple-graph maximum for {n_nodes} nodes")]
    TooManyEdges { n_nodes: usize, n_edges: usize },
    #[error("invalid generation parameters: {0}")]
    InvalidParams(String),
    #[error("no unit pair at distance {0}")]
    NoPathOfLength(usize),
    #[error("no usable graph after {0} attempts")]
    GenerationExhausted(u64),
    #[error("invalid unit label {0:?}")]
    InvalidLabel(String),
    #[error("duplicate unit label {0:?}")]
    DuplicateLabel(String),
    #[error("unknown unit {0:?}")]
    UnknownUnit(String),
    #[error("rule {0} connects a unit to itself")]
    SelfLoop(usize),
    #[error("rule {0} duplicates an earlier rule on the same unit pair")]
    ParallelRule(usize),
    #[error("graph is not connected")]
    Disconnected,
    #[error("rule {0} closes a cycle whose factors do not multiply to 1")]
    InconsistentFactors(usize),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error(transparent)]
    Mod(#[from] ModError),
}

/// A unit: dense index plus the label used in prompts.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct UnitId {
    pub id: usize,
    pub label: String,
}

/// Which orientation of a rule the prompt states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Presentation {
    AsIs,
    Flipped,
}

/// "One `src` equals `factor` `dst`": a quantity in `src` times `factor` is
/// the same quantity expressed in `dst`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ConversionRule {
    pub src: usize,
    pub dst: usize,
    pub factor: Residue,
    pub presentation: Presentation,
}

/// A rule in the orientation shown to the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StatedRule {
    pub from: usize,
    pub to: usize,
    pub factor: Residue,
}

impl ConversionRule {
    pub fn stated(&self, m: Modulus) -> StatedRule {
        match self.presentation {
            Presentation::AsIs => StatedRule { from: self.src, to: self.dst, factor: self.factor },
            Presentation::Flipped => StatedRule {
                from: self.dst,
                to: self.src,
                factor: mod_inv(self.factor, m).expect("factor is a nonzero residue"),
            },
        }
    }

    pub fn connects(&self, a: usize, b: usize) -> bool {
        (self.src == a && self.dst == b) || (self.src == b && self.dst == a)
    }

    /// Multiplier applied when converting from `from` to the other endpoint.
    pub fn multiplier_from(&self, from: usize, m: Modulus) -> Residue {
        let dir = if from == self.src { Direction::Forward } else { Direction::Backward };
        traverse(Residue::ONE, self.factor, dir, m)
    }
}

/// Is `label` usable as a unit name in the token grammar?
pub fn is_valid_label(label: &str) -> bool {
    let mut chars = label.chars();
    let Some(first) = chars.next() else { return false };
    first.is_ascii_alphabetic() && chars.all(|c| c.is_ascii_alphanumeric()) && !RESERVED_TOKENS.contains(&label)
}

#[derive(Debug, Clone)]
pub struct ConversionGraph {
    modulus: Modulus,
    units: Vec<UnitId>,
    rules: Vec<ConversionRule>,
    potentials: Vec<Residue>,
    // unit -> [(neighbor, rule index)], neighbors ascending
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl PartialEq for ConversionGraph {
    /// Potentials are hidden state and only defined up to scaling, so they
    /// take no part in equality.
    fn eq(&self, other: &Self) -> bool {
        self.modulus == other.modulus && self.units == other.units && self.rules == other.rules
    }
}

impl Eq for ConversionGraph {}

impl ConversionGraph {
    /// Builds a graph from labels and rules, deriving potentials from the
    /// factors. Fails unless the rules form a connected, simple,
    /// cycle-consistent graph.
    pub fn from_parts(modulus: Modulus, labels: Vec<String>, rules: Vec<ConversionRule>) -> Result<Self, GraphError> {
        let units = Self::check_labels(labels)?;
        let adjacency = Self::check_rules(modulus, units.len(), &rules)?;
        let products = tree_products(modulus, units.len(), &rules, &adjacency).ok_or(GraphError::Disconnected)?;
        for (idx, rule) in rules.iter().enumerate() {
            let expected = modulus.mul(products[rule.dst], mod_inv(products[rule.src], modulus)?);
            if expected != rule.factor {
                return Err(GraphError::InconsistentFactors(idx));
            }
        }
        Ok(ConversionGraph { modulus, units, rules, potentials: products, adjacency })
    }

    /// Builds a graph from potentials; factors are derived, so the result is
    /// consistent by construction.
    pub(crate) fn from_potentials(
        modulus: Modulus,
        labels: Vec<String>,
        edges: Vec<(usize, usize, Presentation)>,
        potentials: Vec<Residue>,
    ) -> Result<Self, GraphError> {
        let units = Self::check_labels(labels)?;
        if potentials.len() != units.len() {
            return Err(GraphError::InvalidParams("one potential per unit".into()));
        }
        let mut rules = Vec::with_capacity(edges.len());
        for (src, dst, presentation) in edges {
            let factor = modulus.mul(potentials[dst], mod_inv(potentials[src], modulus)?);
            rules.push(ConversionRule { src, dst, factor, presentation });
        }
        let adjacency = Self::check_rules(modulus, units.len(), &rules)?;
        if tree_products(modulus, units.len(), &rules, &adjacency).is_none() {
            return Err(GraphError::Disconnected);
        }
        Ok(ConversionGraph { modulus, units, rules, potentials, adjacency })
    }

    fn check_labels(labels: Vec<String>) -> Result<Vec<UnitId>, GraphError> {
        let mut seen = std::collections::HashSet::new();
        let mut units = Vec::with_capacity(labels.len());
        for (id, label) in labels.into_iter().enumerate() {
            if !is_valid_label(&label) {
                return Err(GraphError::InvalidLabel(label));
            }
            if !seen.insert(label.clone()) {
                return Err(GraphError::DuplicateLabel(label));
            }
            units.push(UnitId { id, label });
        }
        if units.is_empty() {
            return Err(GraphError::InvalidParams("graph has no units".into()));
        }
        Ok(units)
    }

    fn check_rules(
        modulus: Modulus,
        n: usize,
        rules: &[ConversionRule],
    ) -> Result<Vec<Vec<(usize, usize)>>, GraphError> {
        let mut adjacency = vec![Vec::new(); n];
        for (idx, rule) in rules.iter().enumerate() {
            if rule.src >= n || rule.dst >= n {
                return Err(GraphError::UnknownUnit(format!("#{}", rule.src.max(rule.dst))));
            }
            if rule.src == rule.dst {
                return Err(GraphError::SelfLoop(idx));
            }
            modulus.residue(rule.factor.get())?;
            if adjacency[rule.src].iter().any(|&(v, _)| v == rule.dst) {
                return Err(GraphError::ParallelRule(idx));
            }
            adjacency[rule.src].push((rule.dst, idx));
            adjacency[rule.dst].push((rule.src, idx));
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok(adjacency)
    }

    pub fn modulus(&self) -> Modulus {
        self.modulus
    }

    pub fn units(&self) -> &[UnitId] {
        &self.units
    }

    pub fn n_units(&self) -> usize {
        self.units.len()
    }

    pub fn rules(&self) -> &[ConversionRule] {
        &self.rules
    }

    pub fn label(&self, unit: usize) -> &str {
        &self.units[unit].label
    }

    pub fn unit_index(&self, label: &str) -> Option<usize> {
        self.units.iter().position(|u| u.label == label)
    }

    pub fn potential(&self, unit: usize) -> Residue {
        self.potentials[unit]
    }

    /// `(neighbor, rule index)` pairs, neighbors in ascending id order.
    pub fn neighbors(&self, unit: usize) -> &[(usize, usize)] {
        &self.adjacency[unit]
    }

    pub fn rule_between(&self, a: usize, b: usize) -> Option<&ConversionRule> {
        self.adjacency.get(a)?.iter().find(|&&(v, _)| v == b).map(|&(_, idx)| &self.rules[idx])
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.rule_between(a, b).is_some()
    }

    /// Conversion multiplier from `from` to `to` along their shared rule.
    pub fn multiplier(&self, from: usize, to: usize) -> Option<Residue> {
        self.rule_between(from, to).map(|r| r.multiplier_from(from, self.modulus))
    }

    /// Closed-form conversion between any two units.
    pub fn convert(&self, qty: Residue, from: usize, to: usize) -> Residue {
        let m = self.modulus;
        let inv = mod_inv(self.potentials[from], m).expect("potentials are nonzero");
        m.mul(m.mul(qty, self.potentials[to]), inv)
    }

    /// Unweighted BFS distances from `from`; `None` for unreachable units.
    pub fn distances(&self, from: usize) -> Vec<Option<usize>> {
        bfs(&self.adjacency, from).dist
    }
}

struct Bfs {
    dist: Vec<Option<usize>>,
    parent: Vec<Option<(usize, usize)>>,
    order: Vec<usize>,
}

/// BFS from `from`: distances, tree parents `(unit, rule)` and visit order.
fn bfs(adjacency: &[Vec<(usize, usize)>], from: usize) -> Bfs {
    let n = adjacency.len();
    let mut dist = vec![None; n];
    let mut parent = vec![None; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::new();
    dist[from] = Some(0);
    queue.push_back(from);
    while let Some(u) = queue.pop_front() {
        order.push(u);
        let d = dist[u].unwrap();
        for &(v, rule) in &adjacency[u] {
            if dist[v].is_none() {
                dist[v] = Some(d + 1);
                parent[v] = Some((u, rule));
                queue.push_back(v);
            }
        }
    }
    Bfs { dist, parent, order }
}

/// Conversion multiplier from unit 0 to every unit along a BFS tree.
/// `None` if the graph is disconnected.
fn tree_products(
    m: Modulus,
    n: usize,
    rules: &[ConversionRule],
    adjacency: &[Vec<(usize, usize)>],
) -> Option<Vec<Residue>> {
    let tree = bfs(adjacency, 0);
    if tree.order.len() != n {
        return None;
    }
    let mut products = vec![Residue::ONE; n];
    for &u in tree.order.iter().skip(1) {
        let (p, rule) = tree.parent[u].expect("reached units have parents");
        products[u] = m.mul(products[p], rules[rule].multiplier_from(p, m));
    }
    Some(products)
}

/// One generated problem: a graph, a conversion query and its answer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProblemInstance {
    pub problem_id: String,
    pub graph: ConversionGraph,
    pub source_unit: usize,
    pub target_unit: usize,
    pub source_qty: Residue,
    /// Rule indices in the order the prompt lists them.
    pub rule_order: Vec<usize>,
    pub canonical_plan: Vec<usize>,
    pub gt_answer: Residue,
}

impl ProblemInstance {
    pub fn modulus(&self) -> Modulus {
        self.graph.modulus()
    }

    pub fn path_len(&self) -> usize {
        self.canonical_plan.len().saturating_sub(1)
    }

    pub fn source_label(&self) -> &str {
        self.graph.label(self.source_unit)
    }

    pub fn target_label(&self) -> &str {
        self.graph.label(self.target_unit)
    }
}

/// Lexicographically smallest shortest path (by unit id) from `source` to
/// `target`.
pub fn canonical_plan(graph: &ConversionGraph, source: usize, target: usize) -> Option<Vec<usize>> {
    let to_target = graph.distances(target);
    let mut d = to_target[source]?;
    let mut plan = vec![source];
    let mut cur = source;
    while d > 0 {
        let next = graph.neighbors(cur).iter().map(|&(v, _)| v).find(|&v| to_target[v] == Some(d - 1))?;
        plan.push(next);
        cur = next;
        d -= 1;
    }
    Some(plan)
}
