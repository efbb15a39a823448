//! Tree-structured model: noisy 2-way marginals on the tree edges, and
//! ancestral sampling along the tree directed away from a root.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{DiscreteTable, Schema};
use crate::dp::{self, Mechanism, RdpAccountant};
use crate::error::{Error, Result};
use crate::graph::{orient_from_root, Edge, SpanningTree};
use crate::marginals::{self, clip_and_rescale, Marginal, MarginalKind};
use crate::par::Exec;
use crate::rng::{NoiseRng, RngSeed};

/// Rows drawn from one RNG substream; fixes the partitioning so output does
/// not depend on the thread count.
pub const SAMPLE_CHUNK: usize = 8192;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroMassParent {
    pub parent: usize,
    pub child: usize,
    pub value: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub schema: Schema,
    pub edges: Vec<Edge>,
    pub root: usize,
    /// Probabilities per attribute.
    pub one_way: Vec<Marginal>,
    /// Probabilities per tree edge, same order as `edges`, `edge.a` outer.
    pub edge_joints: Vec<Marginal>,
    /// Parent values whose conditional had no mass; their children fall
    /// back to the child's marginal under the edge joint.
    pub zero_mass_parents: Vec<ZeroMassParent>,
    /// Per edge, the larger TVD between an endpoint's marginal implied by
    /// the edge joint and its 1-way estimate.
    pub one_way_discrepancy: Vec<f64>,
}

fn normalise(values: &[f64]) -> Vec<f64> {
    clip_and_rescale(values, 1.0).0
}

impl TreeModel {
    /// Builds a model from probability tables, clipping and renormalising
    /// every table and flagging zero-mass parent values.
    pub fn new(schema: Schema, tree: &SpanningTree, one_way: Vec<Marginal>, edge_joints: Vec<Marginal>) -> Result<Self> {
        let d = schema.len();
        if tree.n_nodes() != d {
            return Err(Error::ShapeMismatch(format!("tree over {} nodes, schema has {d}", tree.n_nodes())));
        }
        if one_way.len() != d || edge_joints.len() != tree.edges().len() {
            return Err(Error::ShapeMismatch("one table per attribute and per edge expected".into()));
        }
        let sizes = schema.domain_sizes();
        let mut ow = Vec::with_capacity(d);
        for (i, m) in one_way.into_iter().enumerate() {
            if m.attrs() != [i] || m.shape() != [sizes[i]] {
                return Err(Error::ShapeMismatch(format!("1-way table {i} has the wrong layout")));
            }
            ow.push(Marginal::new(vec![i], vec![sizes[i]], normalise(m.values()), MarginalKind::Probabilities)?);
        }
        let mut joints = Vec::with_capacity(edge_joints.len());
        for (e, m) in tree.edges().iter().zip(edge_joints) {
            if m.attrs() != [e.a, e.b] || m.shape() != [sizes[e.a], sizes[e.b]] {
                return Err(Error::ShapeMismatch(format!("edge table {e} has the wrong layout")));
            }
            joints.push(Marginal::new(
                vec![e.a, e.b],
                vec![sizes[e.a], sizes[e.b]],
                normalise(m.values()),
                MarginalKind::Probabilities,
            )?);
        }
        let mut model = TreeModel {
            schema,
            edges: tree.edges().to_vec(),
            root: 0,
            one_way: ow,
            edge_joints: joints,
            zero_mass_parents: Vec::new(),
            one_way_discrepancy: Vec::new(),
        };
        model.one_way_discrepancy = model
            .edge_joints
            .iter()
            .map(|j| {
                let a = marginals::tvd(&j.project_first()?, &model.one_way[j.attrs()[0]])?;
                let b = marginals::tvd(&j.project_second()?, &model.one_way[j.attrs()[1]])?;
                Ok(a.max(b))
            })
            .collect::<Result<_>>()?;
        let plan = model.plan()?;
        model.zero_mass_parents = plan.zero_mass;
        Ok(model)
    }

    pub fn tree(&self) -> Result<SpanningTree> {
        SpanningTree::unweighted(self.schema.len(), self.edges.clone())
    }

    fn plan(&self) -> Result<SamplingPlan> {
        let tree = self.tree()?;
        let sizes = self.schema.domain_sizes();
        let root_cdf = cumulative(self.one_way[self.root].values());
        let mut steps = Vec::new();
        let mut zero_mass = Vec::new();
        for (parent, child) in orient_from_root(&tree, self.root) {
            let k = self
                .edges
                .binary_search(&Edge::new(parent, child))
                .expect("arc comes from the tree");
            let joint = &self.edge_joints[k];
            let parent_first = joint.attrs()[0] == parent;
            let (pn, cn) = (sizes[parent], sizes[child]);
            let at = |p: usize, c: usize| {
                if parent_first {
                    joint.values()[p * cn + c]
                } else {
                    joint.values()[c * pn + p]
                }
            };
            let fallback: Vec<f64> = (0..cn).map(|c| (0..pn).map(|p| at(p, c)).sum()).collect();
            let mut cdfs = Vec::with_capacity(pn);
            for p in 0..pn {
                let row: Vec<f64> = (0..cn).map(|c| at(p, c)).collect();
                if row.iter().sum::<f64>() > 0.0 {
                    cdfs.push(cumulative(&row));
                } else {
                    zero_mass.push(ZeroMassParent {
                        parent,
                        child,
                        value: p as u32,
                    });
                    cdfs.push(cumulative(&fallback));
                }
            }
            steps.push(Step { parent, child, cdfs });
        }
        Ok(SamplingPlan {
            root: self.root,
            root_cdf,
            steps,
            zero_mass,
        })
    }

    /// Draws `n_out` independent rows.
    pub fn sample(&self, n_out: usize, seed: RngSeed, exec: Exec) -> Result<DiscreteTable> {
        let plan = self.plan()?;
        let d = self.schema.len();
        let chunks = n_out.div_ceil(SAMPLE_CHUNK);
        let parts = exec.map_range(chunks, |c| {
            let rows = SAMPLE_CHUNK.min(n_out - c * SAMPLE_CHUNK);
            let mut rng = seed.stream(&format!("rows/{c}"));
            let mut out = vec![0u32; rows * d];
            for r in 0..rows {
                plan.draw(&mut out[r * d..(r + 1) * d], &mut rng);
            }
            out
        });
        DiscreteTable::from_cells(self.schema.clone(), parts.concat())
    }
}

struct Step {
    parent: usize,
    child: usize,
    cdfs: Vec<Vec<f64>>,
}

struct SamplingPlan {
    root: usize,
    root_cdf: Vec<f64>,
    steps: Vec<Step>,
    zero_mass: Vec<ZeroMassParent>,
}

impl SamplingPlan {
    fn draw(&self, row: &mut [u32], rng: &mut NoiseRng) {
        row[self.root] = pick(&self.root_cdf, rng.random());
        for s in &self.steps {
            let p = row[s.parent] as usize;
            row[s.child] = pick(&s.cdfs[p], rng.random());
        }
    }
}

/// Cumulative distribution with every entry from the last positive-mass
/// value onward pinned to exactly 1, so a uniform draw in `[0, 1)` never
/// lands past it.
fn cumulative(p: &[f64]) -> Vec<f64> {
    let total: f64 = p.iter().map(|v| v.max(0.0)).sum();
    let n = p.len();
    let mass = |v: f64| if total > 0.0 { v.max(0.0) / total } else { 1.0 / n as f64 };
    let last = (0..n).rev().find(|&i| mass(p[i]) > 0.0).unwrap_or(0);
    let mut acc = 0.0;
    (0..n)
        .map(|i| {
            acc += mass(p[i]);
            if i >= last {
                1.0
            } else {
                acc
            }
        })
        .collect()
}

fn pick(cdf: &[f64], u: f64) -> u32 {
    cdf.partition_point(|&c| c <= u) as u32
}

/// Measures the 2-way marginal of every tree edge with the Gaussian
/// mechanism, `σ = Δ·√(k/(2ρ))` for `k` edges, and assembles the model.
///
/// `one_way` holds the stage-1 estimates (counts or probabilities).
#[allow(clippy::too_many_arguments)]
pub fn measure_model(
    table: &DiscreteTable,
    tree: &SpanningTree,
    one_way: Vec<Marginal>,
    rho: f64,
    sensitivity: f64,
    rng: &mut NoiseRng,
    accountant: &mut RdpAccountant,
) -> Result<TreeModel> {
    let k = tree.edges().len();
    let mut joints = Vec::with_capacity(k);
    if k > 0 {
        if !(rho > 0.0) {
            return Err(Error::InvalidParameter(format!("measurement budget must be positive, got {rho}")));
        }
        let sigma = sensitivity * (k as f64 / (2.0 * rho)).sqrt();
        for e in tree.edges() {
            let exact = marginals::two_way(table, e.a, e.b)?;
            let mut values = exact.values().to_vec();
            let cost = dp::gaussian_vector(&mut values, sensitivity, sigma, rng)?;
            accountant.charge(format!("measure/{}-{}", e.a, e.b), cost, Mechanism::Gaussian { sigma, sensitivity });
            joints.push(Marginal::new(exact.attrs().to_vec(), exact.shape().to_vec(), values, MarginalKind::Probabilities)?);
        }
    }
    TreeModel::new(table.schema().clone(), tree, one_way, joints)
}

/// Model built from exact marginals; the zero-noise limit of
/// [`measure_model`].
pub fn exact_model(table: &DiscreteTable, tree: &SpanningTree) -> Result<TreeModel> {
    let d = table.n_attributes();
    let one_way = (0..d).map(|i| marginals::one_way(table, i)).collect::<Result<_>>()?;
    let joints = tree
        .edges()
        .iter()
        .map(|e| marginals::two_way(table, e.a, e.b))
        .collect::<Result<_>>()?;
    TreeModel::new(table.schema().clone(), tree, one_way, joints)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovCheck {
    pub x: usize,
    pub y: usize,
    pub given: usize,
    pub cmi_bits: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovReport {
    pub tolerance: f64,
    pub checks: Vec<MarkovCheck>,
    /// Pairs with too few rows per conditioning cell.
    pub skipped: Vec<(usize, usize)>,
}

impl MarkovReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Empirical local Markov check with the tree rooted at attribute 0: for
/// every node `x` with parent `p` and every non-descendant `y ≠ p`,
/// `I(x; y | p)` must not exceed `tolerance`. Pairs with fewer than
/// `min_rows_per_cell` rows per cell of the `(x, y, p)` table are skipped.
pub fn local_markov_verify(
    table: &DiscreteTable,
    tree: &SpanningTree,
    tolerance: f64,
    min_rows_per_cell: usize,
) -> Result<MarkovReport> {
    let d = table.n_attributes();
    if tree.n_nodes() != d {
        return Err(Error::ShapeMismatch(format!("tree over {} nodes, table has {d}", tree.n_nodes())));
    }
    let arcs = orient_from_root(tree, 0);
    let mut parent = vec![usize::MAX; d];
    let mut children = vec![Vec::new(); d];
    for &(p, c) in &arcs {
        parent[c] = p;
        children[p].push(c);
    }
    let sizes = table.schema().domain_sizes();
    let columns: Vec<Vec<u32>> = (0..d).map(|i| table.column(i)).collect::<Result<_>>()?;
    let mut report = MarkovReport {
        tolerance,
        checks: Vec::new(),
        skipped: Vec::new(),
    };
    for x in 0..d {
        let p = parent[x];
        if p == usize::MAX {
            continue;
        }
        let mut descendant = vec![false; d];
        let mut stack = vec![x];
        while let Some(v) = stack.pop() {
            descendant[v] = true;
            stack.extend(children[v].iter().copied());
        }
        let keys: Vec<u64> = columns[p].iter().map(|&v| v as u64).collect();
        for y in (0..d).filter(|&y| !descendant[y] && y != p) {
            let cells = sizes[x] * sizes[y] * sizes[p];
            if table.n_rows() < cells * min_rows_per_cell {
                report.skipped.push((x, y));
                continue;
            }
            let cmi = marginals::plug_in_cmi(&columns[x], &columns[y], &keys)?;
            report.checks.push(MarkovCheck {
                x,
                y,
                given: p,
                cmi_bits: cmi,
                passed: cmi <= tolerance,
            });
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Role;

    fn binary_schema(names: &[&str]) -> Schema {
        let parts: Vec<(&str, usize, Role)> = names.iter().map(|&n| (n, 2, Role::Unlabeled)).collect();
        Schema::from_parts(&parts).unwrap()
    }

    fn prob(attrs: Vec<usize>, shape: Vec<usize>, v: Vec<f64>) -> Marginal {
        Marginal::new(attrs, shape, v, MarginalKind::Probabilities).unwrap()
    }

    /// Chain 0-1-2-... of binary attributes where each child copies its
    /// parent with probability `keep`.
    fn chain_model(d: usize, keep: f64) -> TreeModel {
        let names: Vec<String> = (0..d).map(|i| format!("v{i}")).collect();
        let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        let schema = binary_schema(&refs);
        let edges: Vec<Edge> = (1..d).map(|i| Edge::new(i - 1, i)).collect();
        let tree = SpanningTree::unweighted(d, edges.clone()).unwrap();
        let one_way = (0..d).map(|i| prob(vec![i], vec![2], vec![0.5, 0.5])).collect();
        let joints = edges
            .iter()
            .map(|e| {
                let (s, f) = (keep / 2.0, (1.0 - keep) / 2.0);
                prob(vec![e.a, e.b], vec![2, 2], vec![s, f, f, s])
            })
            .collect();
        TreeModel::new(schema, &tree, one_way, joints).unwrap()
    }

    #[test]
    fn clip_and_renormalise_counts() {
        let p = normalise(&[5.0, -2.0, 1.0]);
        assert!((p[0] - 5.0 / 6.0).abs() < 1e-15 && p[1] == 0.0 && (p[2] - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn cumulative_never_overshoots() {
        let c = cumulative(&[0.0, 0.3, 0.7, 0.0]);
        assert_eq!(c, vec![0.0, 0.3, 1.0, 1.0]);
        assert_eq!(pick(&c, 0.0), 1);
        assert_eq!(pick(&c, 0.2999), 1);
        assert_eq!(pick(&c, 0.3), 2);
        assert_eq!(pick(&c, 0.999_999_999), 2);
        assert_eq!(cumulative(&[0.0, 0.0]), vec![0.5, 1.0]);
    }

    #[test]
    fn deterministic_model_gives_constant_rows() {
        let schema = Schema::from_parts(&[("a", 3, Role::Unlabeled), ("b", 2, Role::Unlabeled)]).unwrap();
        let tree = SpanningTree::unweighted(2, vec![Edge::new(0, 1)]).unwrap();
        let one_way = vec![prob(vec![0], vec![3], vec![0.0, 0.0, 1.0]), prob(vec![1], vec![2], vec![0.0, 1.0])];
        let joint = prob(vec![0, 1], vec![3, 2], vec![0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        let m = TreeModel::new(schema, &tree, one_way, vec![joint]).unwrap();
        let t = m.sample(5000, RngSeed(1), Exec::default()).unwrap();
        assert_eq!(t.n_rows(), 5000);
        assert!(t.rows().all(|r| r == [2, 1]));
        assert_eq!(m.zero_mass_parents.len(), 2);
    }

    #[test]
    fn zero_mass_parent_falls_back_to_child_marginal() {
        let schema = binary_schema(&["p", "c"]);
        let tree = SpanningTree::unweighted(2, vec![Edge::new(0, 1)]).unwrap();
        // root says value 1 is common, but the joint never saw p = 1
        let one_way = vec![prob(vec![0], vec![2], vec![0.0, 1.0]), prob(vec![1], vec![2], vec![0.5, 0.5])];
        let joint = prob(vec![0, 1], vec![2, 2], vec![0.25, 0.75, 0.0, 0.0]);
        let m = TreeModel::new(schema, &tree, one_way, vec![joint]).unwrap();
        assert_eq!(m.zero_mass_parents, vec![ZeroMassParent { parent: 0, child: 1, value: 1 }]);
        let t = m.sample(200_000, RngSeed(2), Exec::default()).unwrap();
        let ones = t.column(1).unwrap().iter().filter(|&&v| v == 1).count() as f64 / 200_000.0;
        assert!((ones - 0.75).abs() < 0.01);
        assert!(m.one_way_discrepancy[0] > 0.9);
    }

    #[test]
    fn independence_model_matches_empirically() {
        let schema = binary_schema(&["a", "b"]);
        let tree = SpanningTree::unweighted(2, vec![Edge::new(0, 1)]).unwrap();
        let (pa, pb) = (0.3, 0.6);
        let joint = vec![(1.0 - pa) * (1.0 - pb), (1.0 - pa) * pb, pa * (1.0 - pb), pa * pb];
        let one_way = vec![prob(vec![0], vec![2], vec![1.0 - pa, pa]), prob(vec![1], vec![2], vec![1.0 - pb, pb])];
        let m = TreeModel::new(schema, &tree, one_way, vec![prob(vec![0, 1], vec![2, 2], joint.clone())]).unwrap();
        let t = m.sample(1_000_000, RngSeed(3), Exec::default()).unwrap();
        let emp = marginals::two_way(&t, 0, 1).unwrap().normalized().unwrap();
        let tvd = marginals::tvd(&emp, &prob(vec![0, 1], vec![2, 2], joint)).unwrap();
        assert!(tvd <= 0.01, "{tvd}");
    }

    #[test]
    fn chain_satisfies_local_markov() {
        let m = chain_model(3, 0.85);
        let t = m.sample(1_000_000, RngSeed(4), Exec::default()).unwrap();
        let report = local_markov_verify(&t, &m.tree().unwrap(), 0.002, 10).unwrap();
        assert_eq!(report.checks.len(), 1);
        assert_eq!((report.checks[0].x, report.checks[0].y, report.checks[0].given), (2, 0, 1));
        assert!(report.all_passed(), "{report:?}");
        // the dependence itself is real
        let direct = marginals::plug_in_mi(&t.column(0).unwrap(), &t.column(2).unwrap()).unwrap();
        assert!(direct > 0.1);
    }

    #[test]
    fn star_leaves_are_conditionally_independent() {
        let schema = binary_schema(&["r", "l1", "l2"]);
        let edges = vec![Edge::new(0, 1), Edge::new(0, 2)];
        let tree = SpanningTree::unweighted(3, edges).unwrap();
        let one_way = (0..3).map(|i| prob(vec![i], vec![2], vec![0.5, 0.5])).collect();
        let j = |a, b| prob(vec![a, b], vec![2, 2], vec![0.4, 0.1, 0.1, 0.4]);
        let m = TreeModel::new(schema, &tree, one_way, vec![j(0, 1), j(0, 2)]).unwrap();
        let t = m.sample(1_000_000, RngSeed(5), Exec::default()).unwrap();
        let report = local_markov_verify(&t, &tree, 0.002, 10).unwrap();
        assert_eq!(report.checks.len(), 2);
        assert!(report.checks.iter().all(|c| c.given == 0));
        assert!(report.all_passed());
    }

    #[test]
    fn path_blocks_protected_from_outcome() {
        // p - a - o - x
        let m = chain_model(4, 0.8);
        let t = m.sample(1_000_000, RngSeed(6), Exec::default()).unwrap();
        let keys: Vec<u64> = t.column(1).unwrap().iter().map(|&v| v as u64).collect();
        let cmi = marginals::plug_in_cmi(&t.column(0).unwrap(), &t.column(2).unwrap(), &keys).unwrap();
        assert!(cmi <= 0.002, "{cmi}");
    }

    #[test]
    fn sparse_tables_are_skipped() {
        let m = chain_model(3, 0.9);
        let t = m.sample(50, RngSeed(7), Exec::default()).unwrap();
        let report = local_markov_verify(&t, &m.tree().unwrap(), 0.002, 10).unwrap();
        assert!(report.checks.is_empty());
        assert_eq!(report.skipped, vec![(2, 0)]);
    }

    #[test]
    fn sampling_is_identical_across_exec_modes() {
        let m = chain_model(5, 0.7);
        let a = m.sample(30_000, RngSeed(8), Exec::Sequential).unwrap();
        let b = m.sample(30_000, RngSeed(8), Exec::Parallel).unwrap();
        assert_eq!(a, b);
        let c = m.sample(30_000, RngSeed(9), Exec::Parallel).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn measurement_charges_budget_and_converges() {
        let m = chain_model(4, 0.8);
        let table = m.sample(20_000, RngSeed(10), Exec::default()).unwrap();
        let tree = m.tree().unwrap();
        let one_way: Vec<Marginal> = (0..4).map(|i| marginals::one_way(&table, i).unwrap()).collect();
        let mut rng = RngSeed(11).stream("measure");
        let mut acc = RdpAccountant::new();
        let noisy = measure_model(&table, &tree, one_way.clone(), 0.3, 1.0, &mut rng, &mut acc).unwrap();
        assert_eq!(acc.entries().len(), 3);
        assert!((acc.total_rho() - 0.3).abs() < 1e-12);
        assert!(noisy.edge_joints.iter().all(|j| (j.total() - 1.0).abs() < 1e-9));

        let mut acc = RdpAccountant::new();
        let sharp = measure_model(&table, &tree, one_way, 1e12, 1.0, &mut rng, &mut acc).unwrap();
        let exact = exact_model(&table, &tree).unwrap();
        for (a, b) in sharp.edge_joints.iter().zip(&exact.edge_joints) {
            assert!(marginals::tvd(a, b).unwrap() < 1e-6);
        }
    }

    #[test]
    fn model_serialises() {
        let m = chain_model(3, 0.6);
        let json = serde_json::to_string(&m).unwrap();
        let back: TreeModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
    }
}
