use super::{ConversionGraph, GraphError, ProblemInstance};
use crate::modmath::{mod_inv, traverse, Direction, Residue};

/// Converts `qty` along a walk of units. `None` if two consecutive units
/// share no rule.
pub fn walk_quantity(graph: &ConversionGraph, qty: Residue, walk: &[usize]) -> Option<Residue> {
    let m = graph.modulus();
    let mut q = qty;
    for pair in walk.windows(2) {
        let (u, v) = (pair[0], pair[1]);
        let rule = graph.rule_between(u, v)?;
        let dir = if rule.src == u { Direction::Forward } else { Direction::Backward };
        q = traverse(q, rule.factor, dir, m);
    }
    Some(q)
}

/// Walks the canonical plan step by step.
pub fn solve(problem: &ProblemInstance) -> (Residue, Vec<usize>) {
    let answer = walk_quantity(&problem.graph, problem.source_qty, &problem.canonical_plan)
        .expect("canonical plan follows existing rules");
    (answer, problem.canonical_plan.clone())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathResult {
    pub units: Vec<usize>,
    pub end_qty: Residue,
}

/// Every simple path from `s` to `t` with at most `max_len` edges, with the
/// quantity that `start_qty` converts to along it.
pub fn enumerate_paths(
    graph: &ConversionGraph,
    s: usize,
    t: usize,
    max_len: usize,
    start_qty: Residue,
) -> Vec<PathResult> {
    let mut out = Vec::new();
    let mut on_path = vec![false; graph.n_units()];
    let mut path = vec![s];
    on_path[s] = true;
    dfs(graph, t, max_len, start_qty, &mut path, &mut on_path, &mut out);
    out
}

fn dfs(
    graph: &ConversionGraph,
    t: usize,
    max_len: usize,
    qty: Residue,
    path: &mut Vec<usize>,
    on_path: &mut [bool],
    out: &mut Vec<PathResult>,
) {
    let u = *path.last().unwrap();
    if u == t {
        out.push(PathResult { units: path.clone(), end_qty: qty });
        return;
    }
    if path.len() > max_len {
        return;
    }
    for &(v, _) in graph.neighbors(u) {
        if on_path[v] {
            continue;
        }
        let next = graph.modulus().mul(qty, graph.multiplier(u, v).unwrap());
        on_path[v] = true;
        path.push(v);
        dfs(graph, t, max_len, next, path, on_path, out);
        path.pop();
        on_path[v] = false;
    }
}

/// Factor product around each fundamental cycle of a DFS spanning tree,
/// computed from the rule factors alone. A consistent graph yields all ones.
pub fn cycle_products(graph: &ConversionGraph) -> Result<Vec<Residue>, GraphError> {
    let m = graph.modulus();
    let n = graph.n_units();
    // Multiplier from unit 0 to each unit along the tree.
    let mut reach: Vec<Option<Residue>> = vec![None; n];
    let mut tree_rule = vec![false; graph.rules().len()];
    reach[0] = Some(Residue::ONE);
    let mut stack = vec![0];
    while let Some(u) = stack.pop() {
        for &(v, idx) in graph.neighbors(u) {
            if reach[v].is_none() {
                let rule = &graph.rules()[idx];
                let dir = if rule.src == u { Direction::Forward } else { Direction::Backward };
                reach[v] = Some(traverse(reach[u].unwrap(), rule.factor, dir, m));
                tree_rule[idx] = true;
                stack.push(v);
            }
        }
    }
    if reach.iter().any(Option::is_none) {
        return Err(GraphError::Disconnected);
    }
    let mut products = Vec::new();
    for (idx, rule) in graph.rules().iter().enumerate() {
        if tree_rule[idx] {
            continue;
        }
        // root -> src (tree), src -> dst (rule), dst -> root (tree, reversed)
        let to_src = reach[rule.src].unwrap();
        let to_dst = reach[rule.dst].unwrap();
        let around = m.mul(m.mul(to_src, rule.factor), mod_inv(to_dst, m)?);
        products.push(around);
    }
    Ok(products)
}
