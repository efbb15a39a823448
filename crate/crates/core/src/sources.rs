//! Built-in data sources and instance generators.

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::dataset::{AttributeSpec, DiscreteTable, Role, Schema};
use crate::error::{Error, Result};
use crate::graph::AttributeGraph;
use crate::hardness::SatInstance;
use crate::par::Exec;
use crate::rng::RngSeed;
use crate::sampler::SAMPLE_CHUNK;

pub const EXAMPLE_NAMES: [&str; 5] = ["sex", "age", "edu", "relation", "income"];

/// The five-attribute example graph: `sex` protected, `edu` admissible,
/// `income` the outcome; pairs not listed have weight zero.
pub fn example_graph() -> AttributeGraph {
    let names = EXAMPLE_NAMES.iter().map(|s| s.to_string()).collect();
    let roles = vec![
        Role::Protected,
        Role::Unlabeled,
        Role::Admissible,
        Role::Unlabeled,
        Role::Outcome,
    ];
    let mut g = AttributeGraph::new(names, roles).expect("static graph");
    for (a, b, w) in [
        ("sex", "relation", 5.0),
        ("edu", "age", 9.0),
        ("relation", "edu", 5.0),
        ("income", "age", 8.0),
        ("sex", "age", 9.0),
        ("edu", "income", 1.0),
        ("edu", "sex", 8.0),
    ] {
        g.set_weight_by_name(a, b, w).expect("static graph");
    }
    g
}

/// The tree the greedy selector returns on [`example_graph`], as name pairs.
pub const EXAMPLE_GREEDY_EDGES: [(&str, &str); 4] = [
    ("sex", "age"),
    ("age", "edu"),
    ("sex", "relation"),
    ("edu", "income"),
];

/// Random roles with non-empty, disjoint `P`, `A` and `O`. With
/// `saturated`, no attribute is left unlabeled.
pub fn random_roles<R: Rng + ?Sized>(d: usize, saturated: bool, rng: &mut R) -> Result<Vec<Role>> {
    if d < 3 {
        return Err(Error::InvalidParameter(format!("need at least 3 attributes for three roles, got {d}")));
    }
    let pool: &[Role] = if saturated {
        &[Role::Protected, Role::Admissible, Role::Outcome]
    } else {
        &[Role::Protected, Role::Admissible, Role::Outcome, Role::Unlabeled]
    };
    let mut roles: Vec<Role> = (0..d).map(|_| pool[rng.random_range(0..pool.len())]).collect();
    let mut slots: Vec<usize> = (0..d).collect();
    for (k, role) in [Role::Protected, Role::Admissible, Role::Outcome].into_iter().enumerate() {
        let pick = rng.random_range(k..d);
        slots.swap(k, pick);
        roles[slots[k]] = role;
    }
    Ok(roles)
}

/// Complete graph with independent uniform weights in `[0, 1)`.
pub fn random_graph<R: Rng + ?Sized>(roles: Vec<Role>, rng: &mut R) -> Result<AttributeGraph> {
    let d = roles.len();
    let weights = (0..d * d.saturating_sub(1) / 2).map(|_| rng.random::<f64>()).collect();
    AttributeGraph::from_weights((0..d).map(|i| format!("a{i}")).collect(), roles, weights)
}

/// Every pair weighted 1: every fair tree ties, the worst case for the
/// best-first search.
pub fn uniform_graph(roles: Vec<Role>) -> Result<AttributeGraph> {
    let d = roles.len();
    AttributeGraph::from_weights(
        (0..d).map(|i| format!("a{i}")).collect(),
        roles,
        vec![1.0; d * d.saturating_sub(1) / 2],
    )
}

/// A discrete Bayesian network over attributes listed in topological
/// order. `cpts[i][k]` is the distribution of attribute `i` given the
/// `k`-th configuration of its parents (mixed radix, first parent outer).
#[derive(Debug, Clone)]
pub struct DagSource {
    pub schema: Schema,
    pub parents: Vec<Vec<usize>>,
    pub cpts: Vec<Vec<Vec<f64>>>,
}

impl DagSource {
    pub fn new(schema: Schema, parents: Vec<Vec<usize>>, cpts: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let sizes = schema.domain_sizes();
        let d = sizes.len();
        if parents.len() != d || cpts.len() != d {
            return Err(Error::ShapeMismatch("one parent list and one table per attribute expected".into()));
        }
        for i in 0..d {
            if parents[i].iter().any(|&p| p >= i) {
                return Err(Error::Schema(format!("attribute {i} has a parent that is not earlier in the order")));
            }
            let configs: usize = parents[i].iter().map(|&p| sizes[p]).product();
            if cpts[i].len() != configs {
                return Err(Error::ShapeMismatch(format!(
                    "attribute {i}: {} rows for {configs} parent configurations",
                    cpts[i].len()
                )));
            }
            for row in &cpts[i] {
                let s: f64 = row.iter().sum();
                if row.len() != sizes[i] || row.iter().any(|p| !(*p >= 0.0)) || (s - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidParameter(format!("attribute {i}: a row is not a distribution")));
                }
            }
        }
        Ok(DagSource { schema, parents, cpts })
    }

    fn draw_row<R: Rng + ?Sized>(&self, rng: &mut R, row: &mut [u32]) {
        let sizes = self.schema.domain_sizes();
        for i in 0..row.len() {
            let k = self.parents[i].iter().fold(0usize, |k, &p| k * sizes[p] + row[p] as usize);
            let dist = &self.cpts[i][k];
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut v = dist.len() - 1;
            for (j, p) in dist.iter().enumerate() {
                acc += p;
                if u < acc {
                    v = j;
                    break;
                }
            }
            row[i] = v as u32;
        }
    }

    pub fn sample(&self, rows: usize, seed: RngSeed, exec: Exec) -> Result<DiscreteTable> {
        let d = self.schema.len();
        let parts = exec.map_range(rows.div_ceil(SAMPLE_CHUNK), |c| {
            let len = SAMPLE_CHUNK.min(rows - c * SAMPLE_CHUNK);
            let mut rng = seed.stream(&format!("source/{c}"));
            let mut out = vec![0u32; len * d];
            for r in 0..len {
                self.draw_row(&mut rng, &mut out[r * d..(r + 1) * d]);
            }
            out
        });
        DiscreteTable::from_cells(self.schema.clone(), parts.concat())
    }
}

fn random_distribution<R: Rng + ?Sized>(k: usize, concentration: f64, rng: &mut R) -> Vec<f64> {
    let gamma = Gamma::new(concentration, 1.0).expect("positive shape");
    let mut v: Vec<f64> = (0..k).map(|_| gamma.sample(rng).max(1e-12)).collect();
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

/// Tree-shaped source: attribute `i > 0` has one parent drawn uniformly
/// from the earlier attributes; tables are Dirichlet draws.
pub fn random_tree_source(domains: &[usize], roles: &[Role], concentration: f64, seed: RngSeed) -> Result<DagSource> {
    if domains.len() != roles.len() || domains.is_empty() {
        return Err(Error::ShapeMismatch("one role per domain expected".into()));
    }
    let mut rng = seed.stream("source/structure");
    let attrs = domains
        .iter()
        .zip(roles)
        .enumerate()
        .map(|(i, (&k, &r))| AttributeSpec::new(format!("x{i}"), k, r))
        .collect();
    let schema = Schema::new(attrs)?;
    let mut parents = Vec::new();
    let mut cpts = Vec::new();
    for (i, &k) in domains.iter().enumerate() {
        let ps = if i == 0 { vec![] } else { vec![rng.random_range(0..i)] };
        let configs: usize = ps.iter().map(|&p| domains[p]).product();
        cpts.push((0..configs).map(|_| random_distribution(k, concentration, &mut rng)).collect());
        parents.push(ps);
    }
    DagSource::new(schema, parents, cpts)
}

/// Six attributes with domains 3, 4, 2, 5, 3, 4 and a random tree
/// structure.
pub fn six_attribute_source(seed: RngSeed) -> Result<DagSource> {
    random_tree_source(&[3, 4, 2, 5, 3, 4], &[Role::Unlabeled; 6], 0.7, seed)
}

/// Planted bias: `sex` (protected) shifts `edu` (admissible) and also
/// raises `income` (outcome) directly. `age` hangs off `edu`, `hours` off
/// `sex`. Privileged `sex = 1`, positive `income = 1`.
pub fn planted_bias_source() -> DagSource {
    let schema = Schema::new(vec![
        AttributeSpec::new("sex", 2, Role::Protected),
        AttributeSpec::new("edu", 4, Role::Admissible),
        AttributeSpec::new("income", 2, Role::Outcome),
        AttributeSpec::new("age", 3, Role::Unlabeled),
        AttributeSpec::new("hours", 3, Role::Unlabeled),
    ])
    .expect("static schema");
    let sex = vec![vec![0.5, 0.5]];
    let edu = vec![vec![0.4, 0.3, 0.2, 0.1], vec![0.1, 0.2, 0.3, 0.4]];
    let mut income = Vec::new();
    for s in 0..2 {
        for e in 0..4 {
            let p = 0.15 + 0.05 * e as f64 + 0.35 * s as f64;
            income.push(vec![1.0 - p, p]);
        }
    }
    let age = vec![
        vec![0.5, 0.3, 0.2],
        vec![0.4, 0.35, 0.25],
        vec![0.3, 0.4, 0.3],
        vec![0.2, 0.4, 0.4],
    ];
    let hours = vec![vec![0.5, 0.3, 0.2], vec![0.3, 0.4, 0.3]];
    DagSource::new(
        schema,
        vec![vec![], vec![0], vec![0, 1], vec![1], vec![0]],
        vec![sex, edu, income, age, hours],
    )
    .expect("static source")
}

/// Random satisfiable formulas with `1 ≤ n ≤ max_vars` and
/// `2 ≤ m ≤ max_clauses`, repeated variables in a clause allowed.
pub fn random_satisfiable<R: Rng + ?Sized>(max_vars: usize, max_clauses: usize, rng: &mut R) -> Result<SatInstance> {
    for _ in 0..100_000 {
        let m = rng.random_range(2..=max_clauses.max(2));
        let n = rng.random_range(1..=max_vars.max(1));
        let Ok(phi) = SatInstance::random(n, m, false, rng) else {
            continue;
        };
        if phi.brute_force()?.is_some() {
            return Ok(phi);
        }
    }
    Err(Error::Sat("no satisfiable instance found in the sampling budget".into()))
}

/// Ten small unsatisfiable formulas.
pub fn small_unsatisfiable() -> Vec<SatInstance> {
    let raw: [(usize, &[[i32; 3]]); 10] = [
        (1, &[[1, 1, 1], [-1, -1, -1]]),
        (1, &[[1, 1, 1], [-1, -1, -1], [1, 1, 1]]),
        (1, &[[-1, -1, -1], [1, 1, 1], [-1, -1, -1]]),
        (2, &[[1, 1, 2], [1, 1, -2], [-1, -1, 2], [-1, -1, -2]]),
        (2, &[[1, 2, 2], [1, -2, -2], [-1, 2, 2], [-1, -2, -2]]),
        (2, &[[1, 1, 1], [-1, 2, 2], [-1, -2, -2]]),
        (2, &[[2, 2, 2], [-2, 1, 1], [-2, -1, -1]]),
        (2, &[[1, 1, 2], [-1, -1, -1], [1, 1, -2]]),
        (2, &[[1, 2, 2], [-1, -1, -1], [-2, -2, -2]]),
        (2, &[[2, 2, -1], [-2, -2, -1], [1, 1, 1]]),
    ];
    raw.iter()
        .map(|(n, cs)| SatInstance::new(*n, cs.to_vec()).expect("static instance"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marginals::two_way;

    #[test]
    fn example_shape() {
        let g = example_graph();
        assert_eq!(g.len(), 5);
        assert_eq!(g.weight(0, 1), 9.0);
        assert_eq!(g.weight(2, 4), 1.0);
        assert_eq!(g.weight(1, 3), 0.0);
        assert_eq!(g.weights().iter().sum::<f64>(), 45.0);
    }

    #[test]
    fn roles_cover_all_three() {
        let mut rng = RngSeed(3).stream("roles");
        for d in 3..9 {
            for sat in [false, true] {
                let r = random_roles(d, sat, &mut rng).unwrap();
                for role in [Role::Protected, Role::Admissible, Role::Outcome] {
                    assert!(r.contains(&role));
                }
                if sat {
                    assert!(!r.contains(&Role::Unlabeled));
                }
            }
        }
        assert!(random_roles(2, false, &mut rng).is_err());
    }

    #[test]
    fn unsat_family_is_unsat() {
        let all = small_unsatisfiable();
        assert_eq!(all.len(), 10);
        for phi in all {
            assert!(phi.brute_force().unwrap().is_none(), "{phi}");
        }
    }

    #[test]
    fn satisfiable_sampler() {
        let mut rng = RngSeed(5).stream("sat");
        for _ in 0..20 {
            let phi = random_satisfiable(5, 4, &mut rng).unwrap();
            assert!(phi.n_vars() <= 5 && phi.clauses().len() <= 4);
            assert!(phi.brute_force().unwrap().is_some());
        }
    }

    #[test]
    fn dag_source_reproduces_cpts() {
        let src = planted_bias_source();
        let t = src.sample(200_000, RngSeed(1), Exec::Parallel).unwrap();
        let j = two_way(&t, 0, 1).unwrap();
        let n = t.n_rows() as f64;
        let v = j.values();
        let male: f64 = v[4..8].iter().sum();
        assert!((v[7] / male - 0.4).abs() < 0.01);
        assert!((male / n - 0.5).abs() < 0.01);
        let seq = src.sample(20_000, RngSeed(1), Exec::Sequential).unwrap();
        assert_eq!(seq, src.sample(20_000, RngSeed(1), Exec::Parallel).unwrap());
    }

    #[test]
    fn dag_source_validation() {
        let schema = Schema::from_parts(&[("a", 2, Role::Unlabeled), ("b", 2, Role::Unlabeled)]).unwrap();
        let ok = vec![vec![vec![0.5, 0.5]], vec![vec![1.0, 0.0], vec![0.0, 1.0]]];
        assert!(DagSource::new(schema.clone(), vec![vec![], vec![0]], ok.clone()).is_ok());
        assert!(DagSource::new(schema.clone(), vec![vec![1], vec![]], ok.clone()).is_err());
        let bad = vec![vec![vec![0.6, 0.5]], ok[1].clone()];
        assert!(DagSource::new(schema, vec![vec![], vec![0]], bad).is_err());
    }
}
