//! Attribute graphs, spanning trees and the path-blocking fairness checks.
//!
//! Graphs are complete: every unordered pair carries a weight, with 0
//! standing for "no dependence". Edge lists are always kept sorted so that
//! lexicographic comparison of two trees is comparison of their lists.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dataset::Role;
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Largest node count accepted by [`brute_force_optimal_fair_tree`].
pub const BRUTE_FORCE_LIMIT: usize = 8;

const WEIGHT_TOL: f64 = 1e-9;

/// All unordered pairs `(i, j)`, `i < j`, in row-major order.
pub fn all_pairs(d: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(d * d.saturating_sub(1) / 2);
    for i in 0..d {
        for j in i + 1..d {
            out.push((i, j));
        }
    }
    out
}

/// Position of the pair `{i, j}` in [`all_pairs`]`(d)`.
pub fn pair_index(d: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i < j { (i, j) } else { (j, i) };
    debug_assert!(i != j && j < d);
    i * (2 * d - i - 1) / 2 + (j - i - 1)
}

/// Undirected edge stored with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
}

impl Edge {
    pub fn new(i: usize, j: usize) -> Edge {
        debug_assert_ne!(i, j, "self-loop");
        if i < j {
            Edge { a: i, b: j }
        } else {
            Edge { a: j, b: i }
        }
    }

    pub fn other(&self, v: usize) -> usize {
        if v == self.a {
            self.b
        } else {
            self.a
        }
    }

    pub fn touches(&self, v: usize) -> bool {
        self.a == v || self.b == v
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.a, self.b)
    }
}

/// Complete weighted graph over attributes, with a role per node.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeGraph {
    names: Vec<String>,
    roles: Vec<Role>,
    weights: Vec<f64>,
}

impl AttributeGraph {
    pub fn new(names: Vec<String>, roles: Vec<Role>) -> Result<Self> {
        let d = roles.len();
        Self::from_weights(names, roles, vec![0.0; d * d.saturating_sub(1) / 2])
    }

    /// Nodes named `a0, a1, ...`, all weights 0.
    pub fn with_roles(roles: Vec<Role>) -> Self {
        let names = (0..roles.len()).map(|i| format!("a{i}")).collect();
        Self::new(names, roles).expect("generated names are unique")
    }

    /// `weights` follows [`all_pairs`] order.
    pub fn from_weights(names: Vec<String>, roles: Vec<Role>, weights: Vec<f64>) -> Result<Self> {
        let d = roles.len();
        if names.len() != d {
            return Err(Error::ShapeMismatch(format!("{} names for {} roles", names.len(), d)));
        }
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(Error::Schema(format!("duplicate node name {n:?}")));
            }
        }
        if weights.len() != d * d.saturating_sub(1) / 2 {
            return Err(Error::ShapeMismatch(format!(
                "{} weights for {} pairs",
                weights.len(),
                d * d.saturating_sub(1) / 2
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidParameter(format!("edge weight {w} is not a finite value >= 0")));
        }
        Ok(AttributeGraph {
            names,
            roles,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.roles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roles.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn roles(&self) -> &[Role] {
        &self.roles
    }

    pub fn role(&self, i: usize) -> Role {
        self.roles[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Weights in [`all_pairs`] order.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[pair_index(self.len(), i, j)]
    }

    pub fn edge_weight(&self, e: Edge) -> f64 {
        self.weight(e.a, e.b)
    }

    pub fn set_weight(&mut self, i: usize, j: usize, w: f64) -> Result<()> {
        let d = self.len();
        if i >= d || j >= d {
            return Err(Error::IndexOutOfRange { index: i.max(j), len: d });
        }
        if i == j {
            return Err(Error::InvalidParameter(format!("self-loop on node {i}")));
        }
        if !(w >= 0.0) || !w.is_finite() {
            return Err(Error::InvalidParameter(format!("edge weight {w} is not a finite value >= 0")));
        }
        self.weights[pair_index(d, i, j)] = w;
        Ok(())
    }

    pub fn set_weight_by_name(&mut self, a: &str, b: &str, w: f64) -> Result<()> {
        let i = self.index_of(a).ok_or_else(|| Error::UnknownAttribute(a.into()))?;
        let j = self.index_of(b).ok_or_else(|| Error::UnknownAttribute(b.into()))?;
        self.set_weight(i, j, w)
    }

    pub fn set_roles(&mut self, roles: Vec<Role>) -> Result<()> {
        if roles.len() != self.len() {
            return Err(Error::ShapeMismatch(format!("{} roles for {} nodes", roles.len(), self.len())));
        }
        self.roles = roles;
        Ok(())
    }

    /// Every pair with its weight, in [`all_pairs`] order.
    pub fn edges(&self) -> impl Iterator<Item = (Edge, f64)> + '_ {
        all_pairs(self.len())
            .into_iter()
            .zip(self.weights.iter().copied())
            .map(|((i, j), w)| (Edge::new(i, j), w))
    }

    pub fn nodes_with_role(&self, role: Role) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.roles[i] == role).collect()
    }

    /// Document listing only the positive-weight pairs.
    pub fn to_document(&self) -> GraphDocument {
        GraphDocument {
            schema_version: SCHEMA_VERSION,
            nodes: self.node_docs(),
            edges: self
                .edges()
                .filter(|(_, w)| *w > 0.0)
                .map(|(e, w)| self.edge_doc(e, w))
                .collect(),
            total_weight: None,
            target_weight: None,
        }
    }

    pub fn from_document(doc: &GraphDocument) -> Result<Self> {
        let names: Vec<String> = doc.nodes.iter().map(|n| n.name.clone()).collect();
        let roles: Vec<Role> = doc.nodes.iter().map(|n| n.role).collect();
        let mut g = AttributeGraph::new(names, roles)?;
        let mut seen = std::collections::HashSet::new();
        for e in &doc.edges {
            let i = g.index_of(&e.source).ok_or_else(|| Error::UnknownAttribute(e.source.clone()))?;
            let j = g.index_of(&e.target).ok_or_else(|| Error::UnknownAttribute(e.target.clone()))?;
            if i == j {
                return Err(Error::Schema(format!("self-loop on {:?}", e.source)));
            }
            if !seen.insert(Edge::new(i, j)) {
                return Err(Error::Schema(format!("pair {}-{} listed twice", e.source, e.target)));
            }
            g.set_weight(i, j, e.weight)?;
        }
        Ok(g)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Self::from_document(&serde_json::from_str(s)?)
    }

    pub fn from_json_file(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    fn node_docs(&self) -> Vec<NodeDoc> {
        self.names
            .iter()
            .zip(&self.roles)
            .map(|(n, r)| NodeDoc {
                name: n.clone(),
                role: *r,
            })
            .collect()
    }

    fn edge_doc(&self, e: Edge, w: f64) -> EdgeDoc {
        EdgeDoc {
            source: self.names[e.a].clone(),
            target: self.names[e.b].clone(),
            weight: w,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeDoc {
    pub name: String,
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeDoc {
    pub source: String,
    pub target: String,
    pub weight: f64,
}

/// JSON form shared by graphs and trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphDocument {
    pub schema_version: u32,
    pub nodes: Vec<NodeDoc>,
    pub edges: Vec<EdgeDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_weight: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_weight: Option<f64>,
}

/// A spanning tree with its edges sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanningTree {
    n: usize,
    edges: Vec<Edge>,
    total_weight: f64,
}

impl SpanningTree {
    /// Validates that `edges` span `graph` without cycles and sums their weights.
    pub fn new(graph: &AttributeGraph, edges: Vec<Edge>) -> Result<Self> {
        let mut t = Self::unweighted(graph.len(), edges)?;
        t.total_weight = t.edges.iter().map(|&e| graph.edge_weight(e)).sum();
        Ok(t)
    }

    /// Tree over `n` nodes with total weight 0.
    pub fn unweighted(n: usize, mut edges: Vec<Edge>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Empty("spanning tree over zero nodes".into()));
        }
        if edges.len() != n - 1 {
            return Err(Error::NotSpanning(format!("{} edges for {} nodes", edges.len(), n)));
        }
        let mut uf = UnionFind::new(n);
        for e in &edges {
            if e.b >= n {
                return Err(Error::IndexOutOfRange { index: e.b, len: n });
            }
            if e.a == e.b {
                return Err(Error::NotSpanning(format!("self-loop on {}", e.a)));
            }
            if !uf.union(e.a, e.b) {
                return Err(Error::NotSpanning(format!("edge {e} closes a cycle")));
            }
        }
        edges.sort();
        Ok(SpanningTree {
            n,
            edges,
            total_weight: 0.0,
        })
    }

    pub fn from_pairs(graph: &AttributeGraph, pairs: &[(usize, usize)]) -> Result<Self> {
        Self::new(graph, pairs.iter().map(|&(i, j)| Edge::new(i, j)).collect())
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        i != j && self.edges.binary_search(&Edge::new(i, j)).is_ok()
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        adjacency(self.n, &self.edges)
    }

    pub fn to_document(&self, graph: &AttributeGraph) -> GraphDocument {
        GraphDocument {
            schema_version: SCHEMA_VERSION,
            nodes: graph.node_docs(),
            edges: self
                .edges
                .iter()
                .map(|&e| graph.edge_doc(e, graph.edge_weight(e)))
                .collect(),
            total_weight: Some(self.total_weight),
            target_weight: None,
        }
    }

    pub fn from_document(doc: &GraphDocument) -> Result<(AttributeGraph, Self)> {
        let g = AttributeGraph::from_document(doc)?;
        let index = |name: &str| g.index_of(name).ok_or_else(|| Error::UnknownAttribute(name.to_string()));
        let edges = doc
            .edges
            .iter()
            .map(|e| Ok(Edge::new(index(&e.source)?, index(&e.target)?)))
            .collect::<Result<_>>()?;
        let t = SpanningTree::new(&g, edges)?;
        Ok((g, t))
    }
}

pub fn adjacency(n: usize, edges: &[Edge]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for e in edges {
        adj[e.a].push(e.b);
        adj[e.b].push(e.a);
    }
    adj
}

/// Decodes a Prüfer sequence of length `n − 2` into a tree on `n ≥ 2` nodes.
pub fn tree_from_pruefer(n: usize, seq: &[usize]) -> Result<SpanningTree> {
    if n < 2 || seq.len() != n - 2 {
        return Err(Error::InvalidParameter(format!(
            "Prüfer sequence of length {} for {} nodes",
            seq.len(),
            n
        )));
    }
    if let Some(&bad) = seq.iter().find(|&&v| v >= n) {
        return Err(Error::IndexOutOfRange { index: bad, len: n });
    }
    let mut degree = vec![1usize; n];
    for &v in seq {
        degree[v] += 1;
    }
    let mut edges = Vec::with_capacity(n - 1);
    for &v in seq {
        let leaf = (0..n).find(|&u| degree[u] == 1).expect("a leaf always exists");
        edges.push(Edge::new(leaf, v));
        degree[leaf] -= 1;
        degree[v] -= 1;
    }
    let rest: Vec<usize> = (0..n).filter(|&u| degree[u] == 1).collect();
    edges.push(Edge::new(rest[0], rest[1]));
    SpanningTree::unweighted(n, edges)
}

/// Union-find with union by size and undo support.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
    history: Vec<usize>,
    components: usize,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
            history: Vec::new(),
            components: n,
        }
    }

    pub fn find(&self, mut x: usize) -> usize {
        while self.parent[x] != x {
            x = self.parent[x];
        }
        x
    }

    pub fn connected(&self, a: usize, b: usize) -> bool {
        self.find(a) == self.find(b)
    }

    pub fn components(&self) -> usize {
        self.components
    }

    /// Merges the sets of `a` and `b`; false if they were already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        self.union_roots(a, b).is_some()
    }

    /// Like [`union`](Self::union) but returns `(absorbed, surviving)` roots.
    pub fn union_roots(&mut self, a: usize, b: usize) -> Option<(usize, usize)> {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return None;
        }
        if self.size[ra] > self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[ra] = rb;
        self.size[rb] += self.size[ra];
        self.history.push(ra);
        self.components -= 1;
        Some((ra, rb))
    }

    pub fn snapshot(&self) -> usize {
        self.history.len()
    }

    pub fn rollback(&mut self, snapshot: usize) {
        while self.history.len() > snapshot {
            let child = self.history.pop().unwrap();
            let root = self.parent[child];
            self.size[root] -= self.size[child];
            self.parent[child] = child;
            self.components += 1;
        }
    }
}

/// Outcome of offering an edge to a [`FairForest`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Admission {
    Accepted,
    Cycle,
    Unfair,
}

fn role_mask(r: Role) -> u8 {
    match r {
        Role::Protected => 1,
        Role::Outcome => 2,
        _ => 0,
    }
}

/// Incremental forest that refuses edges closing a cycle or opening a
/// protected-to-outcome path with no admissible node on it.
///
/// A path is unblocked exactly when every node on it is non-admissible, so
/// it is enough to track components of the subgraph induced by
/// non-admissible nodes and whether each holds a protected and an outcome
/// node.
#[derive(Debug, Clone)]
pub struct FairForest {
    roles: Vec<Role>,
    cycle: UnionFind,
    open: UnionFind,
    mask: Vec<u8>,
    mask_log: Vec<(usize, u8)>,
    edges: Vec<Edge>,
}

#[derive(Debug, Clone, Copy)]
pub struct Checkpoint {
    cycle: usize,
    open: usize,
    masks: usize,
    edges: usize,
}

impl FairForest {
    pub fn new(roles: &[Role]) -> Self {
        let n = roles.len();
        FairForest {
            roles: roles.to_vec(),
            cycle: UnionFind::new(n),
            open: UnionFind::new(n),
            mask: roles.iter().map(|&r| role_mask(r)).collect(),
            mask_log: Vec::new(),
            edges: Vec::new(),
        }
    }

    pub fn check(&self, e: Edge) -> Admission {
        if self.cycle.connected(e.a, e.b) {
            return Admission::Cycle;
        }
        if self.roles[e.a] == Role::Admissible || self.roles[e.b] == Role::Admissible {
            return Admission::Accepted;
        }
        let m = self.mask[self.open.find(e.a)] | self.mask[self.open.find(e.b)];
        if m == 3 {
            Admission::Unfair
        } else {
            Admission::Accepted
        }
    }

    /// Adds `e` if admissible and reports what happened.
    pub fn add(&mut self, e: Edge) -> Admission {
        let verdict = self.check(e);
        if verdict != Admission::Accepted {
            return verdict;
        }
        self.cycle.union(e.a, e.b);
        if self.roles[e.a] != Role::Admissible && self.roles[e.b] != Role::Admissible {
            if let Some((child, root)) = self.open.union_roots(e.a, e.b) {
                self.mask_log.push((root, self.mask[root]));
                self.mask[root] |= self.mask[child];
            }
        }
        self.edges.push(e);
        Admission::Accepted
    }

    pub fn connected(&self, a: usize, b: usize) -> bool {
        self.cycle.connected(a, b)
    }

    pub fn components(&self) -> usize {
        self.cycle.components()
    }

    pub fn is_spanning(&self) -> bool {
        self.cycle.components() <= 1
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            cycle: self.cycle.snapshot(),
            open: self.open.snapshot(),
            masks: self.mask_log.len(),
            edges: self.edges.len(),
        }
    }

    pub fn rollback(&mut self, cp: Checkpoint) {
        self.cycle.rollback(cp.cycle);
        self.open.rollback(cp.open);
        while self.mask_log.len() > cp.masks {
            let (root, old) = self.mask_log.pop().unwrap();
            self.mask[root] = old;
        }
        self.edges.truncate(cp.edges);
    }

    /// Joins the remaining components through `hub`, which should be an
    /// admissible node (or any node when no protected/outcome pair exists).
    pub fn complete_through(&mut self, hub: usize) -> Result<()> {
        for v in 0..self.roles.len() {
            if !self.connected(hub, v) && self.add(Edge::new(hub, v)) != Admission::Accepted {
                return Err(Error::NotSpanning(format!("cannot join node {v} fairly")));
            }
        }
        Ok(())
    }
}

/// Fairness of a spanning tree: every protected-to-outcome tree path
/// contains an admissible node. Vacuously true when either set is empty.
pub fn is_fair_tree(tree: &SpanningTree, roles: &[Role]) -> Result<bool> {
    if roles.len() != tree.n_nodes() {
        return Err(Error::NotSpanning(format!(
            "tree spans {} nodes but {} roles were given",
            tree.n_nodes(),
            roles.len()
        )));
    }
    let adj = tree.adjacency();
    for p in (0..roles.len()).filter(|&i| roles[i] == Role::Protected) {
        let mut stack = vec![(p, usize::MAX, false)];
        while let Some((v, from, blocked)) = stack.pop() {
            let blocked = blocked || roles[v] == Role::Admissible;
            if roles[v] == Role::Outcome && !blocked {
                return Ok(false);
            }
            for &u in &adj[v] {
                if u != from {
                    stack.push((u, v, blocked));
                }
            }
        }
    }
    Ok(true)
}

/// True iff some path in the forest joins `from` and `to` with no
/// admissible node strictly inside it.
pub fn has_unblocked_path(n: usize, forest: &[Edge], from: usize, to: usize, roles: &[Role]) -> bool {
    if from == to {
        return true;
    }
    let adj = adjacency(n, forest);
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([from]);
    seen[from] = true;
    while let Some(v) = queue.pop_front() {
        if v != from && roles[v] == Role::Admissible {
            continue;
        }
        for &u in &adj[v] {
            if u == to {
                return true;
            }
            if !seen[u] {
                seen[u] = true;
                queue.push_back(u);
            }
        }
    }
    false
}

/// Every neighbour of an outcome node is admissible or an outcome.
pub fn neighbor_restriction_check(tree: &SpanningTree, roles: &[Role]) -> bool {
    let ok = |r: Role| matches!(r, Role::Admissible | Role::Outcome);
    tree.edges().iter().all(|e| {
        (roles[e.a] != Role::Outcome || ok(roles[e.b])) && (roles[e.b] != Role::Outcome || ok(roles[e.a]))
    })
}

/// Arcs `(parent, child)` of the tree directed away from `root`, in BFS order.
pub fn orient_from_root(tree: &SpanningTree, root: usize) -> Vec<(usize, usize)> {
    let adj = tree.adjacency();
    let mut seen = vec![false; tree.n_nodes()];
    let mut arcs = Vec::with_capacity(tree.n_nodes().saturating_sub(1));
    let mut queue = VecDeque::from([root]);
    seen[root] = true;
    while let Some(v) = queue.pop_front() {
        for &u in &adj[v] {
            if !seen[u] {
                seen[u] = true;
                arcs.push((v, u));
                queue.push_back(u);
            }
        }
    }
    arcs
}

/// Directed criterion: every directed path from a protected node to an
/// outcome node passes through an admissible node.
pub fn directed_paths_blocked(n: usize, arcs: &[(usize, usize)], roles: &[Role]) -> bool {
    let mut out = vec![Vec::new(); n];
    for &(u, v) in arcs {
        out[u].push(v);
    }
    for p in (0..n).filter(|&i| roles[i] == Role::Protected) {
        let mut stack = vec![p];
        let mut seen = vec![false; n];
        seen[p] = true;
        while let Some(v) = stack.pop() {
            for &u in &out[v] {
                if roles[u] == Role::Outcome {
                    return false;
                }
                if !seen[u] && roles[u] != Role::Admissible {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
    }
    true
}

/// Classical maximum-weight spanning tree; ties broken towards the
/// lexicographically smaller pair.
pub fn kruskal_max(graph: &AttributeGraph) -> Result<SpanningTree> {
    if graph.is_empty() {
        return Err(Error::Empty("graph has no nodes".into()));
    }
    let mut order: Vec<(Edge, f64)> = graph.edges().collect();
    order.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
    let mut uf = UnionFind::new(graph.len());
    let edges = order
        .into_iter()
        .filter(|(e, _)| uf.union(e.a, e.b))
        .map(|(e, _)| e)
        .collect();
    SpanningTree::new(graph, edges)
}

fn fair_tree_impossible(roles: &[Role]) -> bool {
    roles.contains(&Role::Protected)
        && roles.contains(&Role::Outcome)
        && !roles.contains(&Role::Admissible)
}

/// Exhaustive maximum-weight fair spanning tree for at most
/// [`BRUTE_FORCE_LIMIT`] nodes. Ties go to the lexicographically smallest
/// edge list. `None` when no fair spanning tree exists.
pub fn brute_force_optimal_fair_tree(graph: &AttributeGraph) -> Result<Option<SpanningTree>> {
    let d = graph.len();
    if d > BRUTE_FORCE_LIMIT {
        return Err(Error::GuardTripped(format!(
            "brute-force enumeration limited to {BRUTE_FORCE_LIMIT} nodes, got {d}"
        )));
    }
    let mut best: Option<(f64, Vec<Edge>)> = None;
    for_each_fair_tree(graph, |edges, w| {
        if best.as_ref().is_none_or(|(bw, _)| w > bw + WEIGHT_TOL) {
            best = Some((w, edges.to_vec()));
        }
    })?;
    best.map(|(_, edges)| SpanningTree::new(graph, edges)).transpose()
}

/// Visits every fair spanning tree in lexicographic order of its edge list.
pub fn for_each_fair_tree<F: FnMut(&[Edge], f64)>(graph: &AttributeGraph, mut visit: F) -> Result<()> {
    let d = graph.len();
    if d == 0 {
        return Err(Error::Empty("graph has no nodes".into()));
    }
    let pairs: Vec<(Edge, f64)> = graph.edges().collect();
    let mut forest = FairForest::new(graph.roles());

    fn rec<F: FnMut(&[Edge], f64)>(
        pairs: &[(Edge, f64)],
        pos: usize,
        need: usize,
        w: f64,
        forest: &mut FairForest,
        visit: &mut F,
    ) {
        if need == 0 {
            visit(forest.edges(), w);
            return;
        }
        if pairs.len() - pos < need {
            return;
        }
        let (e, ew) = pairs[pos];
        let cp = forest.checkpoint();
        if forest.add(e) == Admission::Accepted {
            rec(pairs, pos + 1, need - 1, w + ew, forest, visit);
            forest.rollback(cp);
        }
        rec(pairs, pos + 1, need, w, forest, visit);
    }

    rec(&pairs, 0, d - 1, 0.0, &mut forest, &mut visit);
    Ok(())
}

/// Exact maximum-weight fair spanning tree by branch and bound over the
/// positive-weight pairs, for graphs too large to enumerate.
///
/// The bound is the current weight plus a maximum-weight forest of the
/// edges still admissible. The best forest found is completed with
/// zero-weight edges through an admissible node. `max_nodes` caps the
/// number of search nodes.
pub fn branch_and_bound_fair_tree(graph: &AttributeGraph, max_nodes: u64) -> Result<Option<SpanningTree>> {
    let d = graph.len();
    if d == 0 {
        return Err(Error::Empty("graph has no nodes".into()));
    }
    if fair_tree_impossible(graph.roles()) {
        return Ok(None);
    }
    let mut cand: Vec<(Edge, f64)> = graph.edges().filter(|(_, w)| *w > 0.0).collect();
    cand.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));

    struct Search<'a> {
        cand: &'a [(Edge, f64)],
        forest: FairForest,
        best_w: f64,
        best: Vec<Edge>,
        nodes: u64,
        max_nodes: u64,
    }

    impl Search<'_> {
        fn bound(&self, pos: usize) -> f64 {
            let mut uf = self.forest.cycle.clone();
            let mut extra = 0.0;
            for &(e, w) in &self.cand[pos..] {
                if uf.components() == 1 {
                    break;
                }
                if self.forest.check(e) == Admission::Accepted && uf.union(e.a, e.b) {
                    extra += w;
                }
            }
            extra
        }

        fn run(&mut self, mut pos: usize, w: f64) -> Result<()> {
            self.nodes += 1;
            if self.nodes > self.max_nodes {
                return Err(Error::GuardTripped(format!(
                    "branch and bound exceeded {} search nodes",
                    self.max_nodes
                )));
            }
            if w > self.best_w + WEIGHT_TOL {
                self.best_w = w;
                self.best = self.forest.edges().to_vec();
            }
            while pos < self.cand.len() && self.forest.check(self.cand[pos].0) != Admission::Accepted {
                pos += 1;
            }
            if pos == self.cand.len() || w + self.bound(pos) <= self.best_w + WEIGHT_TOL {
                return Ok(());
            }
            let (e, ew) = self.cand[pos];
            let cp = self.forest.checkpoint();
            self.forest.add(e);
            self.run(pos + 1, w + ew)?;
            self.forest.rollback(cp);
            self.run(pos + 1, w)
        }
    }

    let mut s = Search {
        cand: &cand,
        forest: FairForest::new(graph.roles()),
        best_w: f64::NEG_INFINITY,
        best: Vec::new(),
        nodes: 0,
        max_nodes,
    };
    s.run(0, 0.0)?;

    let mut forest = FairForest::new(graph.roles());
    for &e in &s.best {
        forest.add(e);
    }
    let hub = graph
        .roles()
        .iter()
        .position(|&r| r == Role::Admissible)
        .unwrap_or(0);
    forest.complete_through(hub)?;
    SpanningTree::new(graph, forest.edges().to_vec()).map(Some)
}
