use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{canonical_plan, ConversionGraph, GraphError, Presentation, ProblemInstance, MAX_ATTEMPTS};
use crate::modmath::{Modulus, Residue};
use crate::rng::{stream, Purpose};

/// Single-letter labels, minus the grammar keywords.
const LETTERS: &str = "ABCDEFGHIJKLMNOSTUVWXYZ";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenParams {
    pub n_nodes: usize,
    pub n_edges: usize,
    pub path_len: usize,
    pub modulus: Modulus,
    pub seed: u64,
    pub problem_index: u64,
}

impl GenParams {
    /// 10 units, 12 rules, 5 conversion steps, arithmetic mod 5.
    pub fn standard(seed: u64, problem_index: u64) -> Self {
        GenParams { n_nodes: 10, n_edges: 12, path_len: 5, modulus: Modulus::FIVE, seed, problem_index }
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        let n = self.n_nodes;
        if n < 2 {
            return Err(GraphError::InvalidParams(format!("n_nodes must be >= 2, got {n}")));
        }
        if n > label_pool(n).len() {
            return Err(GraphError::InvalidParams(format!("n_nodes must be <= 676, got {n}")));
        }
        if self.n_edges + 1 < n {
            return Err(GraphError::InsufficientEdges { n_nodes: n, n_edges: self.n_edges });
        }
        if self.n_edges > n * (n - 1) / 2 {
            return Err(GraphError::TooManyEdges { n_nodes: n, n_edges: self.n_edges });
        }
        if self.path_len == 0 || self.path_len >= n {
            return Err(GraphError::InvalidParams(format!(
                "path_len must be in [1, {}], got {}",
                n - 1,
                self.path_len
            )));
        }
        Ok(())
    }

    pub fn problem_id(&self) -> String {
        format!("uc-{}-{}", self.seed, self.problem_index)
    }

    fn rng(&self, purpose: Purpose, attempt: u64) -> ChaCha8Rng {
        stream(self.seed, self.problem_index, purpose, attempt)
    }
}

fn label_pool(n: usize) -> Vec<String> {
    if n <= LETTERS.len() {
        LETTERS.chars().map(String::from).collect()
    } else {
        let mut pool = Vec::with_capacity(26 * 26);
        for a in 'A'..='Z' {
            for b in 'a'..='z' {
                pool.push(format!("{a}{b}"));
            }
        }
        pool
    }
}

/// Draws `n` distinct unit labels. Single capital letters while they last,
/// two-letter codes such as `Km` beyond that.
pub fn unit_labels(n: usize, rng: &mut impl Rng) -> Vec<String> {
    let mut pool = label_pool(n);
    let (chosen, _) = pool.partial_shuffle(rng, n);
    chosen.to_vec()
}

/// Random connected simple graph with `n_edges` rules: a uniform spanning
/// tree plus extra distinct edges, uniform potentials, uniform presentation.
pub fn generate_graph(params: &GenParams) -> Result<ConversionGraph, GraphError> {
    generate_graph_attempt(params, 0)
}

pub(crate) fn generate_graph_attempt(params: &GenParams, attempt: u64) -> Result<ConversionGraph, GraphError> {
    params.validate()?;
    let n = params.n_nodes;
    let m = params.modulus;
    let labels = unit_labels(n, &mut params.rng(Purpose::Labels, attempt));
    let mut rng = params.rng(Purpose::Graph, attempt);

    // Aldous-Broder on the complete graph gives a uniform labelled tree.
    let mut in_tree = vec![false; n];
    let mut adjacent = vec![vec![false; n]; n];
    let mut cur = rng.random_range(0..n);
    in_tree[cur] = true;
    let mut reached = 1;
    while reached < n {
        let mut next = rng.random_range(0..n - 1);
        if next >= cur {
            next += 1;
        }
        if !in_tree[next] {
            in_tree[next] = true;
            adjacent[cur][next] = true;
            adjacent[next][cur] = true;
            reached += 1;
        }
        cur = next;
    }

    let mut candidates: Vec<(usize, usize)> =
        (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).filter(|&(a, b)| !adjacent[a][b]).collect();
    let extra = params.n_edges + 1 - n;
    let (chosen, _) = candidates.partial_shuffle(&mut rng, extra);
    for &(a, b) in chosen.iter() {
        adjacent[a][b] = true;
        adjacent[b][a] = true;
    }

    let potentials: Vec<Residue> =
        (0..n).map(|_| m.residue(rng.random_range(1..m.get())).expect("drawn from [1, p-1]")).collect();

    let mut edges = Vec::with_capacity(params.n_edges);
    for (a, row) in adjacent.iter().enumerate() {
        for (b, &connected) in row.iter().enumerate().skip(a + 1) {
            if connected {
                let presentation = if rng.random_bool(0.5) { Presentation::Flipped } else { Presentation::AsIs };
                edges.push((a, b, presentation));
            }
        }
    }
    ConversionGraph::from_potentials(m, labels, edges, potentials)
}

/// Picks a query on `graph` whose shortest solution takes exactly
/// `params.path_len` steps.
pub fn sample_problem(graph: &ConversionGraph, params: &GenParams) -> Result<ProblemInstance, GraphError> {
    sample_problem_attempt(graph, params, 0)
}

fn sample_problem_attempt(
    graph: &ConversionGraph,
    params: &GenParams,
    attempt: u64,
) -> Result<ProblemInstance, GraphError> {
    let n = graph.n_units();
    let mut pairs = Vec::new();
    for s in 0..n {
        let dist = graph.distances(s);
        for (t, d) in dist.into_iter().enumerate() {
            if d == Some(params.path_len) {
                pairs.push((s, t));
            }
        }
    }
    if pairs.is_empty() {
        return Err(GraphError::NoPathOfLength(params.path_len));
    }
    let (source, target) = pairs[params.rng(Purpose::Pair, attempt).random_range(0..pairs.len())];

    let m = graph.modulus();
    let qty = params.rng(Purpose::Quantity, attempt).random_range(1..m.get());
    let source_qty = m.residue(qty)?;

    let mut rule_order: Vec<usize> = (0..graph.rules().len()).collect();
    rule_order.shuffle(&mut params.rng(Purpose::RuleOrder, attempt));

    let plan = canonical_plan(graph, source, target).expect("pair is connected");
    Ok(ProblemInstance {
        problem_id: params.problem_id(),
        graph: graph.clone(),
        source_unit: source,
        target_unit: target,
        source_qty,
        rule_order,
        canonical_plan: plan,
        gt_answer: graph.convert(source_qty, source, target),
    })
}

/// Generates the problem for `(seed, problem_index)`, resampling the graph
/// until it has a pair at the requested distance.
pub fn generate_problem(params: &GenParams) -> Result<ProblemInstance, GraphError> {
    params.validate()?;
    for attempt in 0..MAX_ATTEMPTS {
        let graph = generate_graph_attempt(params, attempt)?;
        match sample_problem_attempt(&graph, params, attempt) {
            Ok(problem) => return Ok(problem),
            Err(GraphError::NoPathOfLength(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(GraphError::GenerationExhausted(MAX_ATTEMPTS))
}
