//! Quick oracle suites behind the `selftest` subcommand.

use serde::Serialize;

use crate::dp::{dp_to_rho, rdp_to_dp, EXTENDED_ALPHAS};
use crate::error::Result;
use crate::graph::{brute_force_optimal_fair_tree, is_fair_tree};
use crate::hardness::{build_mi_dataset, decode_assignment, forward_tree, reduce, SatInstance};
use crate::rng::RngSeed;
use crate::selection::{greedy_fair_tree, optimal_fair_tree, SearchConfig};
use crate::sources::{example_graph, random_graph, random_roles, EXAMPLE_GREEDY_EDGES};

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> Check {
    match f() {
        Ok((passed, detail)) => Check { name, passed, detail },
        Err(e) => Check {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn example() -> Result<(bool, String)> {
    let g = example_graph();
    let opt = optimal_fair_tree(&g, None, SearchConfig::default())?.tree;
    let greedy = greedy_fair_tree(&g, None)?;
    let mut names: Vec<(String, String)> = greedy
        .edges()
        .iter()
        .map(|e| (g.names()[e.a].clone(), g.names()[e.b].clone()))
        .collect();
    names.sort();
    let mut want: Vec<(String, String)> = EXAMPLE_GREEDY_EDGES
        .iter()
        .map(|&(a, b)| {
            let (i, j) = (g.index_of(a).unwrap(), g.index_of(b).unwrap());
            let (a, b) = if i < j { (a, b) } else { (b, a) };
            (a.to_string(), b.to_string())
        })
        .collect();
    want.sort();
    Ok((
        opt.total_weight() == 30.0 && greedy.total_weight() == 24.0 && names == want,
        format!("optimal {}, greedy {}", opt.total_weight(), greedy.total_weight()),
    ))
}

fn oracle(saturated: bool) -> Result<(bool, String)> {
    let mut rng = RngSeed(if saturated { 2 } else { 1 }).stream("selftest/graphs");
    let mut mismatches = 0;
    for k in 0..20 {
        let d = 4 + k % 3;
        let g = random_graph(random_roles(d, saturated, &mut rng)?, &mut rng)?;
        let best = brute_force_optimal_fair_tree(&g)?.map(|t| t.total_weight());
        let got = if saturated {
            greedy_fair_tree(&g, None)?.total_weight()
        } else {
            optimal_fair_tree(&g, None, SearchConfig::default())?.tree.total_weight()
        };
        if best != Some(got) {
            mismatches += 1;
        }
    }
    Ok((mismatches == 0, format!("{mismatches} of 20 graphs differ from enumeration")))
}

fn conversion() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for eps in [0.1, 1.0, 10.0] {
        for delta in [1e-5, 1e-9] {
            let rho = dp_to_rho(eps, delta, &EXTENDED_ALPHAS)?;
            let back = rdp_to_dp(rho, delta, &EXTENDED_ALPHAS)?.epsilon;
            if back > eps {
                return Ok((false, format!("rho {rho} converts to {back} > {eps}")));
            }
            worst = worst.max(eps - back);
        }
    }
    Ok((worst < 1e-9, format!("largest round-trip gap {worst:e}")))
}

fn reduction() -> Result<(bool, String)> {
    let phi = SatInstance::new(4, vec![[1, 2, -3], [-1, 3, 4], [-2, -4, 3]])?;
    let red = reduce(&phi)?;
    let mut ok = true;
    let mut trees = 0;
    for a in phi.all_solutions()? {
        let t = forward_tree(&red, &a)?;
        ok &= is_fair_tree(&t, red.graph.roles())? && t.total_weight() == red.k;
        ok &= decode_assignment(&t, &red)? == a;
        trees += 1;
    }
    Ok((ok && trees > 0, format!("{trees} forward trees, k = {}", red.k)))
}

fn mi_construction() -> Result<(bool, String)> {
    let ds = build_mi_dataset(&[3.0, 2.0, 1.0], 4096)?;
    let err = (0..3)
        .map(|i| (ds.analytic_mi(i) - ds.targets[i]).abs())
        .fold(0.0, f64::max);
    Ok((err < 1e-12, format!("largest analytic error {err:e}")))
}

pub fn run() -> Vec<Check> {
    vec![
        check("example graph weights", example),
        check("optimal selector vs enumeration", || oracle(false)),
        check("saturated greedy vs enumeration", || oracle(true)),
        check("rdp conversion round trip", conversion),
        check("reduction forward trees", reduction),
        check("mutual information construction", mi_construction),
    ]
}
