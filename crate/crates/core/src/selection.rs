//! Private selection of the model tree.
//!
//! * [`greedy_fair_tree`]: private Kruskal over the pairs that survive
//!   deletion of every outcome edge leaving `O ∪ A`.
//! * [`optimal_fair_tree`]: Gaussian-measured scores, then best-first search
//!   for the maximum-weight fair spanning tree.
//! * [`unconstrained_tree`]: private Kruskal without any restriction.
//!
//! Passing `None` for the privacy context runs the noiseless variants,
//! which use exact scores and charge nothing.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::Role;
use crate::dp::{self, Mechanism, RdpAccountant};
use crate::error::{Error, Result};
use crate::graph::{all_pairs, is_fair_tree, Admission, AttributeGraph, Edge, FairForest, SpanningTree, UnionFind};
use crate::rng::NoiseRng;

pub const DEFAULT_MAX_QUEUE: usize = 500_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectorMode {
    Greedy,
    Optimal,
    Baseline,
}

impl FromStr for SelectorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy" => Ok(SelectorMode::Greedy),
            "optimal" => Ok(SelectorMode::Optimal),
            "baseline" => Ok(SelectorMode::Baseline),
            other => Err(Error::Config(format!("unknown selector {other:?}"))),
        }
    }
}

/// Budget, score sensitivity and noise source for one selection.
pub struct PrivacyContext<'a> {
    pub rho: f64,
    pub sensitivity: f64,
    pub rng: &'a mut NoiseRng,
    pub accountant: &'a mut RdpAccountant,
}

/// Outcome edges may only touch admissible or outcome nodes.
fn outcome_edge_allowed(roles: &[Role], e: Edge) -> bool {
    let keep = |x: usize, y: usize| roles[x] != Role::Outcome || matches!(roles[y], Role::Admissible | Role::Outcome);
    keep(e.a, e.b) && keep(e.b, e.a)
}

fn private_kruskal(graph: &AttributeGraph, restrict: bool, privacy: Option<PrivacyContext<'_>>) -> Result<SpanningTree> {
    let d = graph.len();
    if d == 0 {
        return Err(Error::Empty("graph has no nodes".into()));
    }
    let roles = graph.roles();
    let pairs: Vec<(Edge, f64)> = graph
        .edges()
        .filter(|&(e, _)| !restrict || outcome_edge_allowed(roles, e))
        .collect();
    let steps = d - 1;
    let mut privacy = privacy;
    let epsilon = match &privacy {
        Some(p) if steps > 0 => {
            if !(p.rho > 0.0) {
                return Err(Error::InvalidParameter(format!("selection budget must be positive, got {}", p.rho)));
            }
            (8.0 * p.rho / steps as f64).sqrt()
        }
        _ => 0.0,
    };

    let mut uf = UnionFind::new(d);
    let mut chosen = Vec::with_capacity(steps);
    for step in 0..steps {
        let cand: Vec<(Edge, f64)> = pairs.iter().copied().filter(|(e, _)| !uf.connected(e.a, e.b)).collect();
        if cand.is_empty() {
            return Err(Error::NoCandidateEdge);
        }
        let pick = match privacy.as_mut() {
            None => {
                let mut best = 0;
                for (k, c) in cand.iter().enumerate() {
                    if c.1 > cand[best].1 {
                        best = k;
                    }
                }
                best
            }
            Some(p) => {
                let scores: Vec<f64> = cand.iter().map(|c| c.1).collect();
                let (k, cost) = dp::exponential_mechanism(&scores, epsilon, p.sensitivity, p.rng)?;
                p.accountant.charge(
                    format!("selection/step {step}"),
                    cost,
                    Mechanism::Exponential {
                        epsilon,
                        sensitivity: p.sensitivity,
                    },
                );
                k
            }
        };
        let e = cand[pick].0;
        uf.union(e.a, e.b);
        chosen.push(e);
    }
    SpanningTree::new(graph, chosen)
}

/// Private Kruskal restricted so that outcome nodes only neighbour
/// admissible or outcome nodes. The result is always fair.
pub fn greedy_fair_tree(graph: &AttributeGraph, privacy: Option<PrivacyContext<'_>>) -> Result<SpanningTree> {
    let tree = private_kruskal(graph, true, privacy)?;
    debug_assert!(is_fair_tree(&tree, graph.roles())?);
    Ok(tree)
}

/// Private Kruskal over every pair; the comparison baseline.
pub fn unconstrained_tree(graph: &AttributeGraph, privacy: Option<PrivacyContext<'_>>) -> Result<SpanningTree> {
    private_kruskal(graph, false, privacy)
}

/// Gaussian measurement of every pair score, one query per pair, at
/// `σ = Δ·√(r/(2ρ))` with `r` the number of pairs.
pub fn measure_scores(graph: &AttributeGraph, privacy: PrivacyContext<'_>) -> Result<Vec<f64>> {
    let r = graph.weights().len();
    let mut out = graph.weights().to_vec();
    if r == 0 {
        return Ok(out);
    }
    let sigma = privacy.sensitivity * (r as f64 / (2.0 * privacy.rho)).sqrt();
    for (k, v) in out.iter_mut().enumerate() {
        let (noisy, cost) = dp::gaussian_mechanism(*v, privacy.sensitivity, sigma, privacy.rng)?;
        *v = noisy;
        privacy.accountant.charge(
            format!("selection/pair {k}"),
            cost,
            Mechanism::Gaussian {
                sigma,
                sensitivity: privacy.sensitivity,
            },
        );
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
pub struct SearchConfig {
    pub max_queue: usize,
    pub trace: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            max_queue: DEFAULT_MAX_QUEUE,
            trace: false,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SearchStats {
    pub popped: usize,
    pub pushed: usize,
    pub peak_queue: usize,
    /// Keys in pop order, when tracing.
    pub popped_keys: Vec<f64>,
    /// Smallest key left in the queue when the tree was returned.
    pub min_remaining_key: Option<f64>,
    pub final_key: f64,
}

#[derive(Debug, Clone)]
pub struct OptimalOutcome {
    pub tree: SpanningTree,
    /// Scores the search ran on (noisy unless noiseless).
    pub measured: Vec<f64>,
    pub stats: SearchStats,
}

struct State {
    key: f64,
    edges: Vec<usize>,
}

impl PartialEq for State {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for State {}

impl PartialOrd for State {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for State {
    // reversed so the max-heap pops the smallest (key, size, edge list)
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .key
            .total_cmp(&self.key)
            .then(other.edges.len().cmp(&self.edges.len()))
            .then_with(|| other.edges.cmp(&self.edges))
    }
}

/// Best-first search over fair forests with cost `q_max − q` per edge.
///
/// Forests are grown by appending pairs in increasing index order, so each
/// forest is generated once. Every prefix of a fair forest is a fair forest
/// and costs are non-negative, so the first spanning tree popped has the
/// smallest cost, i.e. the largest score.
pub fn search_fair_tree(roles: &[Role], scores: &[f64], cfg: SearchConfig) -> Result<(Vec<Edge>, SearchStats)> {
    let d = roles.len();
    let pairs = all_pairs(d);
    if scores.len() != pairs.len() {
        return Err(Error::ShapeMismatch(format!("{} scores for {} pairs", scores.len(), pairs.len())));
    }
    if d == 0 {
        return Err(Error::Empty("graph has no nodes".into()));
    }
    let q_max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let cost: Vec<f64> = scores.iter().map(|q| q_max - q).collect();

    let mut stats = SearchStats::default();
    let mut heap = BinaryHeap::new();
    heap.push(State {
        key: 0.0,
        edges: Vec::new(),
    });
    stats.pushed = 1;
    while let Some(state) = heap.pop() {
        stats.popped += 1;
        if cfg.trace {
            stats.popped_keys.push(state.key);
        }
        if state.edges.len() == d - 1 {
            stats.final_key = state.key;
            stats.min_remaining_key = heap.peek().map(|s| s.key);
            let edges = state.edges.iter().map(|&k| Edge::new(pairs[k].0, pairs[k].1)).collect();
            return Ok((edges, stats));
        }
        let mut forest = FairForest::new(roles);
        for &k in &state.edges {
            forest.add(Edge::new(pairs[k].0, pairs[k].1));
        }
        let start = state.edges.last().map_or(0, |&k| k + 1);
        for k in start..pairs.len() {
            let e = Edge::new(pairs[k].0, pairs[k].1);
            if forest.check(e) != Admission::Accepted {
                continue;
            }
            let mut edges = state.edges.clone();
            edges.push(k);
            heap.push(State {
                key: state.key + cost[k],
                edges,
            });
            stats.pushed += 1;
        }
        stats.peak_queue = stats.peak_queue.max(heap.len());
        if heap.len() > cfg.max_queue {
            return Err(Error::GuardTripped(format!(
                "fair-tree search queue exceeded {} entries after {} expansions",
                cfg.max_queue, stats.popped
            )));
        }
    }
    Err(Error::NotSpanning("no fair spanning tree exists for these roles".into()))
}

/// Maximum-weight fair spanning tree on measured scores. The returned
/// tree's `total_weight` is on the true scores of `graph`.
pub fn optimal_fair_tree(
    graph: &AttributeGraph,
    privacy: Option<PrivacyContext<'_>>,
    cfg: SearchConfig,
) -> Result<OptimalOutcome> {
    let measured = match privacy {
        None => graph.weights().to_vec(),
        Some(p) => {
            if !(p.rho > 0.0) {
                return Err(Error::InvalidParameter(format!("selection budget must be positive, got {}", p.rho)));
            }
            measure_scores(graph, p)?
        }
    };
    let (edges, stats) = search_fair_tree(graph.roles(), &measured, cfg)?;
    let tree = SpanningTree::new(graph, edges)?;
    if !is_fair_tree(&tree, graph.roles())? {
        return Err(Error::NotSpanning("search returned an unfair tree".into()));
    }
    Ok(OptimalOutcome { tree, measured, stats })
}

/// Runs the selector named by `mode`.
pub fn select_tree(
    mode: SelectorMode,
    graph: &AttributeGraph,
    privacy: Option<PrivacyContext<'_>>,
    cfg: SearchConfig,
) -> Result<SpanningTree> {
    match mode {
        SelectorMode::Greedy => greedy_fair_tree(graph, privacy),
        SelectorMode::Baseline => unconstrained_tree(graph, privacy),
        SelectorMode::Optimal => optimal_fair_tree(graph, privacy, cfg).map(|o| o.tree),
    }
}
