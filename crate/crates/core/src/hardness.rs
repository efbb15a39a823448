//! The 3-SAT reduction to the fair-tree optimisation problem, as an
//! instance generator, plus a dataset whose pairwise mutual information
//! realises prescribed edge weights.
//!
//! Reduction layout for `n` variables and `m` clauses (`3n + 8m` nodes):
//!
//! * per variable `v`: a protected node `Πv` joined with weight 2 to the
//!   literal nodes `xv` and `¬xv`;
//! * per clause: input slots `s1, s2, s3`, admissible `α`, `α′`, inner
//!   output `O`, relay `x′` and outcome `Ω`, wired as two chained 2-way OR
//!   gadgets (`s1–α 2, s2–α 2, s1–O 1, s2–O 1, O–x′ 3, x′–α′ 2, s3–α′ 2,
//!   x′–Ω 1, s3–Ω 1`);
//! * every slot joined with weight 3 to the node of its literal.
//!
//! The target weight is `k = 22m + 2n`.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{AttributeSpec, DiscreteTable, Role, Schema};
use crate::error::{Error, Result};
use crate::graph::{Admission, AttributeGraph, Edge, FairForest, SpanningTree};
use crate::par::Exec;
use crate::rng::RngSeed;

/// Largest variable count accepted by [`SatInstance::brute_force`].
pub const SAT_BRUTE_FORCE_LIMIT: usize = 24;

/// A CNF formula with exactly three literals per clause. Literals are
/// non-zero integers, `v` for `x_v` and `-v` for `¬x_v`, variables 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SatInstance {
    n_vars: usize,
    clauses: Vec<[i32; 3]>,
}

impl SatInstance {
    /// Validates: literals in range, no clause holding a literal and its
    /// negation, every variable used both positively and negatively.
    pub fn new(n_vars: usize, clauses: Vec<[i32; 3]>) -> Result<Self> {
        if n_vars == 0 || clauses.is_empty() {
            return Err(Error::Sat("need at least one variable and one clause".into()));
        }
        let mut pos = vec![false; n_vars];
        let mut neg = vec![false; n_vars];
        for (c, cl) in clauses.iter().enumerate() {
            for &l in cl {
                let v = l.unsigned_abs() as usize;
                if l == 0 || v > n_vars {
                    return Err(Error::Sat(format!("clause {} has literal {l} outside 1..={n_vars}", c + 1)));
                }
                if cl.contains(&-l) {
                    return Err(Error::Sat(format!("clause {} is trivial: contains {l} and {}", c + 1, -l)));
                }
                if l > 0 {
                    pos[v - 1] = true;
                } else {
                    neg[v - 1] = true;
                }
            }
        }
        if let Some(v) = (0..n_vars).find(|&v| !pos[v] || !neg[v]) {
            return Err(Error::Sat(format!(
                "variable {} must occur both positively and negatively",
                v + 1
            )));
        }
        Ok(SatInstance { n_vars, clauses })
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn clauses(&self) -> &[[i32; 3]] {
        &self.clauses
    }

    pub fn literal_true(l: i32, assignment: &[bool]) -> bool {
        assignment[l.unsigned_abs() as usize - 1] == (l > 0)
    }

    pub fn evaluate(&self, assignment: &[bool]) -> bool {
        assignment.len() == self.n_vars
            && self
                .clauses
                .iter()
                .all(|cl| cl.iter().any(|&l| Self::literal_true(l, assignment)))
    }

    /// First satisfying assignment in counting order (variable 1 is the
    /// low bit, `true` = 1), or `None`.
    pub fn brute_force(&self) -> Result<Option<Vec<bool>>> {
        if self.n_vars > SAT_BRUTE_FORCE_LIMIT {
            return Err(Error::GuardTripped(format!(
                "SAT brute force limited to {SAT_BRUTE_FORCE_LIMIT} variables"
            )));
        }
        Ok((0u64..1 << self.n_vars)
            .map(|bits| (0..self.n_vars).map(|v| bits >> v & 1 == 1).collect::<Vec<bool>>())
            .find(|a| self.evaluate(a)))
    }

    /// Every satisfying assignment.
    pub fn all_solutions(&self) -> Result<Vec<Vec<bool>>> {
        if self.n_vars > SAT_BRUTE_FORCE_LIMIT {
            return Err(Error::GuardTripped(format!(
                "SAT brute force limited to {SAT_BRUTE_FORCE_LIMIT} variables"
            )));
        }
        Ok((0u64..1 << self.n_vars)
            .map(|bits| (0..self.n_vars).map(|v| bits >> v & 1 == 1).collect::<Vec<bool>>())
            .filter(|a| self.evaluate(a))
            .collect())
    }

    pub fn parse_dimacs(text: &str) -> Result<Self> {
        let mut header: Option<(usize, usize)> = None;
        let mut clauses = Vec::new();
        let mut current: Vec<i32> = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('c') || line.starts_with('%') {
                continue;
            }
            if line.starts_with('p') {
                let parts: Vec<&str> = line.split_whitespace().collect();
                if parts.len() != 4 || parts[1] != "cnf" {
                    return Err(Error::Sat(format!("line {}: malformed header {line:?}", ln + 1)));
                }
                let n = parts[2].parse().map_err(|_| Error::Sat(format!("line {}: bad variable count", ln + 1)))?;
                let m = parts[3].parse().map_err(|_| Error::Sat(format!("line {}: bad clause count", ln + 1)))?;
                header = Some((n, m));
                continue;
            }
            if header.is_none() {
                return Err(Error::Sat(format!("line {}: clause before the header", ln + 1)));
            }
            for tok in line.split_whitespace() {
                let l: i32 = tok
                    .parse()
                    .map_err(|_| Error::Sat(format!("line {}: bad literal {tok:?}", ln + 1)))?;
                if l == 0 {
                    let cl: [i32; 3] = current.as_slice().try_into().map_err(|_| {
                        Error::Sat(format!("clause {} has {} literals, expected 3", clauses.len() + 1, current.len()))
                    })?;
                    clauses.push(cl);
                    current.clear();
                } else {
                    current.push(l);
                }
            }
        }
        let (n, m) = header.ok_or_else(|| Error::Sat("missing `p cnf` header".into()))?;
        if !current.is_empty() {
            return Err(Error::Sat("last clause is not terminated by 0".into()));
        }
        if clauses.len() != m {
            return Err(Error::Sat(format!("header declares {m} clauses, found {}", clauses.len())));
        }
        SatInstance::new(n, clauses)
    }

    pub fn to_dimacs(&self) -> String {
        let mut s = format!("p cnf {} {}\n", self.n_vars, self.clauses.len());
        for cl in &self.clauses {
            s.push_str(&format!("{} {} {} 0\n", cl[0], cl[1], cl[2]));
        }
        s
    }

    /// Uniform random clauses until the invariants hold. With
    /// `distinct_vars`, the three literals of a clause use three different
    /// variables.
    pub fn random<R: Rng + ?Sized>(n_vars: usize, n_clauses: usize, distinct_vars: bool, rng: &mut R) -> Result<Self> {
        if distinct_vars && n_vars < 3 {
            return Err(Error::Sat("distinct-variable clauses need at least 3 variables".into()));
        }
        if 3 * n_clauses < 2 * n_vars {
            return Err(Error::Sat(format!(
                "{n_clauses} clauses cannot use {n_vars} variables both ways"
            )));
        }
        for _ in 0..100_000 {
            let clauses = (0..n_clauses)
                .map(|_| {
                    let mut cl = [0i32; 3];
                    let mut k = 0;
                    while k < 3 {
                        let v = rng.random_range(1..=n_vars as i32);
                        if distinct_vars && cl[..k].iter().any(|l| l.abs() == v) {
                            continue;
                        }
                        cl[k] = if rng.random_bool(0.5) { v } else { -v };
                        k += 1;
                    }
                    cl
                })
                .collect();
            if let Ok(inst) = SatInstance::new(n_vars, clauses) {
                return Ok(inst);
            }
        }
        Err(Error::Sat("no valid instance found".into()))
    }
}

impl fmt::Display for SatInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lit = |l: i32| if l > 0 { format!("x{l}") } else { format!("¬x{}", -l) };
        let parts: Vec<String> = self
            .clauses
            .iter()
            .map(|c| format!("({} ∨ {} ∨ {})", lit(c[0]), lit(c[1]), lit(c[2])))
            .collect();
        f.write_str(&parts.join(" ∧ "))
    }
}

/// Node positions inside one clause gadget.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GadgetNode {
    S1,
    S2,
    S3,
    Alpha,
    Out,
    Relay,
    AlphaPrime,
    Omega,
}

const GADGET: [GadgetNode; 8] = [
    GadgetNode::S1,
    GadgetNode::S2,
    GadgetNode::S3,
    GadgetNode::Alpha,
    GadgetNode::Out,
    GadgetNode::Relay,
    GadgetNode::AlphaPrime,
    GadgetNode::Omega,
];

/// Internal OR-gadget edges with weights.
pub const GADGET_EDGES: [(GadgetNode, GadgetNode, f64); 9] = {
    use GadgetNode::*;
    [
        (S1, Alpha, 2.0),
        (S2, Alpha, 2.0),
        (S1, Out, 1.0),
        (S2, Out, 1.0),
        (Out, Relay, 3.0),
        (Relay, AlphaPrime, 2.0),
        (S3, AlphaPrime, 2.0),
        (Relay, Omega, 1.0),
        (S3, Omega, 1.0),
    ]
};

pub const ASSIGNMENT_WEIGHT: f64 = 2.0;
pub const CONNECTOR_WEIGHT: f64 = 3.0;

#[derive(Debug, Clone)]
pub struct Reduction {
    pub instance: SatInstance,
    pub graph: AttributeGraph,
    pub k: f64,
}

impl Reduction {
    pub fn n_nodes(&self) -> usize {
        self.graph.len()
    }

    pub fn pi(&self, v: usize) -> usize {
        3 * v
    }

    /// Node of literal `l` in its variable's assignment gadget.
    pub fn literal_node(&self, l: i32) -> usize {
        let v = l.unsigned_abs() as usize - 1;
        if l > 0 {
            3 * v + 1
        } else {
            3 * v + 2
        }
    }

    pub fn gadget_node(&self, clause: usize, node: GadgetNode) -> usize {
        3 * self.instance.n_vars() + 8 * clause + GADGET.iter().position(|&g| g == node).unwrap()
    }

    fn slot(&self, clause: usize, k: usize) -> usize {
        self.gadget_node(clause, [GadgetNode::S1, GadgetNode::S2, GadgetNode::S3][k])
    }
}

/// Builds the weighted, role-annotated graph and target `k` for `phi`.
pub fn reduce(phi: &SatInstance) -> Result<Reduction> {
    let phi = SatInstance::new(phi.n_vars, phi.clauses.clone())?;
    let n = phi.n_vars();
    let m = phi.clauses().len();
    let mut names = Vec::with_capacity(3 * n + 8 * m);
    let mut roles = Vec::with_capacity(3 * n + 8 * m);
    for v in 1..=n {
        names.extend([format!("pi{v}"), format!("x{v}"), format!("not_x{v}")]);
        roles.extend([Role::Protected, Role::Unlabeled, Role::Unlabeled]);
    }
    for c in 1..=m {
        for (g, label) in GADGET.iter().zip(["s1", "s2", "s3", "alpha", "o", "relay", "alpha2", "omega"]) {
            names.push(format!("c{c}_{label}"));
            roles.push(match g {
                GadgetNode::Alpha | GadgetNode::AlphaPrime => Role::Admissible,
                GadgetNode::Omega => Role::Outcome,
                _ => Role::Unlabeled,
            });
        }
    }
    let graph = AttributeGraph::new(names, roles)?;
    let mut red = Reduction {
        k: (22 * m + 2 * n) as f64,
        instance: phi,
        graph,
    };
    for v in 0..n {
        let (p, x, nx) = (red.pi(v), red.literal_node(v as i32 + 1), red.literal_node(-(v as i32) - 1));
        red.graph.set_weight(p, x, ASSIGNMENT_WEIGHT)?;
        red.graph.set_weight(p, nx, ASSIGNMENT_WEIGHT)?;
    }
    for c in 0..m {
        for &(a, b, w) in &GADGET_EDGES {
            let (i, j) = (red.gadget_node(c, a), red.gadget_node(c, b));
            red.graph.set_weight(i, j, w)?;
        }
        for k in 0..3 {
            let l = red.instance.clauses()[c][k];
            let (s, ln) = (red.slot(c, k), red.literal_node(l));
            red.graph.set_weight(s, ln, CONNECTOR_WEIGHT)?;
        }
    }
    Ok(red)
}

/// The fair tree the hardness argument builds from a satisfying
/// assignment: one assignment edge per variable (to the false literal),
/// every connector, and a weight-13 subtree per clause gadget that routes
/// only a true input to `Ω`; remaining components are joined with
/// zero-weight edges through an admissible node.
///
/// Fails when the chosen weight-`k` edge set contains a cycle, which
/// happens whenever the literal/clause incidence is cyclic (for instance
/// a literal repeated inside one clause) and always when `m ≥ n`.
pub fn forward_tree(red: &Reduction, assignment: &[bool]) -> Result<SpanningTree> {
    let phi = &red.instance;
    if !phi.evaluate(assignment) {
        return Err(Error::Reduction("assignment does not satisfy the formula".into()));
    }
    let mut forest = FairForest::new(red.graph.roles());
    let mut add = |e: Edge, what: &str| match forest.add(e) {
        Admission::Accepted => Ok(()),
        Admission::Cycle => Err(Error::Reduction(format!("{what} edge {e} closes a cycle"))),
        Admission::Unfair => Err(Error::Reduction(format!("{what} edge {e} opens an unblocked path"))),
    };
    for v in 0..phi.n_vars() {
        let var = v as i32 + 1;
        let false_lit = if assignment[v] { -var } else { var };
        add(Edge::new(red.pi(v), red.literal_node(false_lit)), "assignment")?;
    }
    use GadgetNode::*;
    for (c, cl) in phi.clauses().iter().enumerate() {
        for k in 0..3 {
            add(Edge::new(red.slot(c, k), red.literal_node(cl[k])), "connector")?;
        }
        let g = |x| red.gadget_node(c, x);
        for (a, b) in [(S1, Alpha), (S2, Alpha), (Out, Relay), (Relay, AlphaPrime), (S3, AlphaPrime)] {
            add(Edge::new(g(a), g(b)), "gadget")?;
        }
        let truth: Vec<bool> = cl.iter().map(|&l| SatInstance::literal_true(l, assignment)).collect();
        if truth[0] || truth[1] {
            let s = if truth[0] { S1 } else { S2 };
            add(Edge::new(g(s), g(Out)), "gadget")?;
            add(Edge::new(g(Relay), g(Omega)), "gadget")?;
        } else {
            add(Edge::new(g(S1), g(Out)), "gadget")?;
            add(Edge::new(g(S3), g(Omega)), "gadget")?;
        }
    }
    let hub = red.gadget_node(0, Alpha);
    forest.complete_through(hub)?;
    SpanningTree::new(&red.graph, forest.edges().to_vec())
}

/// Reads an assignment off a fair tree of the reduction graph.
///
/// When exactly one assignment edge of a variable is in the tree, the
/// literal on that edge is false. Otherwise (both or neither kept) a
/// literal is true iff its node has no unblocked path to a protected node.
pub fn decode_assignment(tree: &SpanningTree, red: &Reduction) -> Result<Vec<bool>> {
    if tree.n_nodes() != red.n_nodes() {
        return Err(Error::ShapeMismatch(format!(
            "tree over {} nodes, reduction has {}",
            tree.n_nodes(),
            red.n_nodes()
        )));
    }
    let roles = red.graph.roles();
    let adj = tree.adjacency();
    // nodes joined to some protected node by a path with no admissible node
    let mut exposed = vec![false; tree.n_nodes()];
    let mut stack: Vec<usize> = (0..red.instance.n_vars()).map(|v| red.pi(v)).collect();
    for &p in &stack {
        exposed[p] = true;
    }
    while let Some(v) = stack.pop() {
        for &u in &adj[v] {
            if !exposed[u] && roles[u] != Role::Admissible {
                exposed[u] = true;
                stack.push(u);
            }
        }
    }
    Ok((0..red.instance.n_vars())
        .map(|v| {
            let (x, nx) = (red.literal_node(v as i32 + 1), red.literal_node(-(v as i32) - 1));
            let (kx, knx) = (tree.contains(red.pi(v), x), tree.contains(red.pi(v), nx));
            if kx != knx {
                !kx
            } else {
                !exposed[x]
            }
        })
        .collect())
}

/// A hub attribute `A` with prescribed mutual information to independent
/// uniform attributes `B_1 … B_k` over `n` values.
///
/// A tag `T` picks `B_i` with probability `x_i = target_i / log₂ n` and
/// nothing with the remaining probability `λ`; `A = (T, B_T)`, or a single
/// null value when nothing was picked. Then `I(A; B_i) = x_i log₂ n`
/// exactly and the `B_i` are pairwise independent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiDataset {
    pub n_domain: usize,
    pub targets: Vec<f64>,
    pub weights: Vec<f64>,
    pub lambda: f64,
}

pub fn build_mi_dataset(targets: &[f64], n_domain: usize) -> Result<MiDataset> {
    if n_domain < 2 || !n_domain.is_power_of_two() {
        return Err(Error::InvalidParameter(format!("domain size {n_domain} is not a power of two >= 2")));
    }
    if targets.is_empty() || targets.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
        return Err(Error::InvalidParameter("targets must be finite and >= 0".into()));
    }
    let bits = (n_domain as f64).log2();
    let weights: Vec<f64> = targets.iter().map(|t| t / bits).collect();
    let used: f64 = weights.iter().sum();
    if used > 1.0 + 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "targets need {:.6} bits of hub capacity, only {bits} available",
            used * bits
        )));
    }
    Ok(MiDataset {
        n_domain,
        targets: targets.to_vec(),
        weights,
        lambda: (1.0 - used).max(0.0),
    })
}

impl MiDataset {
    pub fn n_leaves(&self) -> usize {
        self.weights.len()
    }

    fn has_null(&self) -> bool {
        self.lambda > 0.0
    }

    pub fn hub_domain(&self) -> usize {
        self.n_leaves() * self.n_domain + self.has_null() as usize
    }

    /// `hub, b1, b2, …`, all unlabeled.
    pub fn schema(&self) -> Result<Schema> {
        let mut attrs = vec![AttributeSpec::new("hub", self.hub_domain(), Role::Unlabeled)];
        for i in 1..=self.n_leaves() {
            attrs.push(AttributeSpec::new(format!("b{i}"), self.n_domain, Role::Unlabeled));
        }
        Schema::new(attrs)
    }

    /// `I(hub; b_leaf)` in bits by summing `p log₂(p / (p_A p_B))` over the
    /// joint support. Every value of `b_leaf` contributes the same amount,
    /// so one value is summed and multiplied by `n`.
    pub fn analytic_mi(&self, leaf: usize) -> f64 {
        let n = self.n_domain as f64;
        let pb = 1.0 / n;
        let b = 0usize;
        let mut acc = 0.0;
        for (i, &x) in self.weights.iter().enumerate() {
            for v in 0..self.n_domain {
                let pa = x / n;
                let joint = if i == leaf {
                    if v == b {
                        pb * x
                    } else {
                        0.0
                    }
                } else {
                    pb * x / n
                };
                if joint > 0.0 {
                    acc += joint * (joint / (pa * pb)).log2();
                }
            }
        }
        if self.has_null() {
            let joint = pb * self.lambda;
            acc += joint * (joint / (self.lambda * pb)).log2();
        }
        acc * n
    }

    pub fn sample(&self, rows: usize, seed: RngSeed, exec: Exec) -> Result<DiscreteTable> {
        let k = self.n_leaves();
        let width = k + 1;
        let mut cdf = Vec::with_capacity(k);
        let mut acc = 0.0;
        for &x in &self.weights {
            acc += x;
            cdf.push(acc);
        }
        let chunk = 8192;
        let parts = exec.map_range(rows.div_ceil(chunk), |c| {
            let len = chunk.min(rows - c * chunk);
            let mut rng = seed.stream(&format!("mi/{c}"));
            let mut out = vec![0u32; len * width];
            for r in 0..len {
                let row = &mut out[r * width..(r + 1) * width];
                for cell in row[1..].iter_mut() {
                    *cell = rng.random_range(0..self.n_domain as u32);
                }
                let u: f64 = rng.random();
                let tag = cdf.partition_point(|&c| c <= u);
                row[0] = if tag < k {
                    (tag * self.n_domain) as u32 + row[1 + tag]
                } else if self.has_null() {
                    (k * self.n_domain) as u32
                } else {
                    // rounding left u above the last cumulative weight
                    ((k - 1) * self.n_domain) as u32 + row[k]
                };
            }
            out
        });
        DiscreteTable::from_cells(self.schema()?, parts.concat())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{brute_force_optimal_fair_tree, is_fair_tree};
    use crate::marginals::plug_in_mi;

    fn inst(n: usize, c: &[[i32; 3]]) -> SatInstance {
        SatInstance::new(n, c.to_vec()).unwrap()
    }

    #[test]
    fn instance_validation() {
        assert!(SatInstance::new(3, vec![[1, 2, 3], [-1, -2, -3]]).is_ok());
        assert!(SatInstance::new(3, vec![[1, -1, 2], [-2, 3, -3]]).is_err());
        assert!(SatInstance::new(3, vec![[1, 2, 3], [-1, -2, 3]]).is_err());
        assert!(SatInstance::new(2, vec![[1, 2, 4], [-1, -2, -1]]).is_err());
        assert!(SatInstance::new(1, vec![[1, 1, 1], [-1, -1, -1]]).is_ok());
    }

    #[test]
    fn dimacs_round_trip() {
        let text = "c example\np cnf 3 2\n1 2 3 0\n-1 -2\n-3 0\n";
        let phi = SatInstance::parse_dimacs(text).unwrap();
        assert_eq!(phi.clauses(), &[[1, 2, 3], [-1, -2, -3]]);
        assert_eq!(SatInstance::parse_dimacs(&phi.to_dimacs()).unwrap(), phi);
        assert!(SatInstance::parse_dimacs("p cnf 3 1\n1 2 0\n").is_err());
        assert!(SatInstance::parse_dimacs("p cnf 3 2\n1 2 3 0\n").is_err());
        assert!(SatInstance::parse_dimacs("1 2 3 0\n").is_err());
    }

    #[test]
    fn sat_brute_force() {
        let phi = inst(3, &[[1, 2, 3], [-1, -2, -3]]);
        let a = phi.brute_force().unwrap().unwrap();
        assert!(phi.evaluate(&a));
        assert_eq!(phi.all_solutions().unwrap().len(), 6);
        assert!(inst(1, &[[1, 1, 1], [-1, -1, -1]]).brute_force().unwrap().is_none());
    }

    #[test]
    fn reduction_audit() {
        let phi = inst(3, &[[1, 2, 3], [-1, -2, -3]]);
        let red = reduce(&phi).unwrap();
        assert_eq!(red.n_nodes(), 3 * 3 + 8 * 2);
        assert_eq!(red.k, 50.0);
        let g = &red.graph;
        for v in 0..3 {
            assert_eq!(g.role(red.pi(v)), Role::Protected);
            assert_eq!(g.role(red.literal_node(v as i32 + 1)), Role::Unlabeled);
            assert_eq!(g.role(red.literal_node(-(v as i32) - 1)), Role::Unlabeled);
        }
        for c in 0..2 {
            assert_eq!(g.role(red.gadget_node(c, GadgetNode::Alpha)), Role::Admissible);
            assert_eq!(g.role(red.gadget_node(c, GadgetNode::AlphaPrime)), Role::Admissible);
            assert_eq!(g.role(red.gadget_node(c, GadgetNode::Omega)), Role::Outcome);
        }
        let positive: Vec<f64> = g.weights().iter().copied().filter(|&w| w > 0.0).collect();
        assert_eq!(positive.len(), 2 * 3 + 2 * (9 + 3));
        assert!(positive.iter().all(|w| [1.0, 2.0, 3.0].contains(w)));
    }

    #[test]
    fn gadget_weights_and_best_subtree() {
        let total: f64 = GADGET_EDGES.iter().map(|e| e.2).sum();
        assert_eq!(total, 15.0);
        // maximum spanning tree of the gadget alone, by exhaustive search
        let names = (0..8).map(|i| format!("g{i}")).collect();
        let mut g = AttributeGraph::new(names, vec![Role::Unlabeled; 8]).unwrap();
        for &(a, b, w) in &GADGET_EDGES {
            let ix = |x| GADGET.iter().position(|&y| y == x).unwrap();
            g.set_weight(ix(a), ix(b), w).unwrap();
        }
        assert_eq!(brute_force_optimal_fair_tree(&g).unwrap().unwrap().total_weight(), 13.0);
    }

    #[test]
    fn forward_tree_is_fair_with_weight_k() {
        let phi = inst(3, &[[1, 2, 3], [-1, -2, -3]]);
        let red = reduce(&phi).unwrap();
        for a in phi.all_solutions().unwrap() {
            let t = forward_tree(&red, &a).unwrap();
            assert!(is_fair_tree(&t, red.graph.roles()).unwrap());
            assert_eq!(t.total_weight(), red.k);
            assert_eq!(decode_assignment(&t, &red).unwrap(), a);
        }
        assert!(forward_tree(&red, &[true, true, true]).is_err());
    }

    #[test]
    fn forward_tree_needs_acyclic_incidence() {
        // three clauses on three variables: the weight-k edge set has
        // n + 10m = 33 edges on 3n + 8m = 33 nodes, so it cannot be a forest
        let phi = inst(3, &[[1, 2, 3], [-1, -2, -3], [1, -2, 3]]);
        let red = reduce(&phi).unwrap();
        let a = phi.brute_force().unwrap().unwrap();
        assert!(matches!(forward_tree(&red, &a), Err(Error::Reduction(_))));
    }

    #[test]
    fn mi_construction_weights() {
        let ds = build_mi_dataset(&[3.0, 2.0, 1.0], 4096).unwrap();
        let expect = [0.25, 1.0 / 6.0, 1.0 / 12.0];
        for (w, e) in ds.weights.iter().zip(expect) {
            assert!((w - e).abs() < 1e-15);
        }
        assert!((ds.lambda - 0.5).abs() < 1e-15);
        for (i, t) in [3.0, 2.0, 1.0].iter().enumerate() {
            assert!((ds.analytic_mi(i) - t).abs() < 1e-12, "{} vs {t}", ds.analytic_mi(i));
        }
        assert_eq!(ds.hub_domain(), 3 * 4096 + 1);
    }

    #[test]
    fn mi_capacity_boundary() {
        let full = build_mi_dataset(&[2.0, 1.0], 8).unwrap();
        assert_eq!(full.lambda, 0.0);
        assert_eq!(full.hub_domain(), 16);
        assert!((full.analytic_mi(0) - 2.0).abs() < 1e-12);
        assert!(build_mi_dataset(&[2.0, 1.5], 8).is_err());
        assert!(build_mi_dataset(&[1.0], 6).is_err());
    }

    #[test]
    fn small_domain_sample_matches_analytic() {
        let ds = build_mi_dataset(&[1.0, 0.5], 4).unwrap();
        let t = ds.sample(400_000, RngSeed(3), Exec::default()).unwrap();
        let hub = t.column(0).unwrap();
        for leaf in 0..2 {
            let mi = plug_in_mi(&hub, &t.column(leaf + 1).unwrap()).unwrap();
            assert!((mi - ds.analytic_mi(leaf)).abs() < 0.01, "{mi}");
        }
        let cross = plug_in_mi(&t.column(1).unwrap(), &t.column(2).unwrap()).unwrap();
        assert!(cross < 0.001);
        let a = ds.sample(20_000, RngSeed(4), Exec::Sequential).unwrap();
        assert_eq!(a, ds.sample(20_000, RngSeed(4), Exec::Parallel).unwrap());
    }
}
