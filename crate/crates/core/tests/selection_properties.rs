use fairsynth_core::dataset::Role;
use fairsynth_core::dp::RdpAccountant;
use fairsynth_core::graph::{branch_and_bound_fair_tree, is_fair_tree, kruskal_max, AttributeGraph};
use fairsynth_core::rng::RngSeed;
use fairsynth_core::Error;
use fairsynth_core::selection::{greedy_fair_tree, optimal_fair_tree, unconstrained_tree, PrivacyContext, SearchConfig};
use proptest::prelude::*;

fn role() -> impl Strategy<Value = Role> {
    prop_oneof![
        Just(Role::Protected),
        Just(Role::Admissible),
        Just(Role::Outcome),
        Just(Role::Unlabeled)
    ]
}

fn greedy_blocked(roles: &[Role]) -> bool {
    let has = |r: Role| roles.contains(&r);
    has(Role::Outcome) && !has(Role::Admissible) && roles.iter().any(|&r| r != Role::Outcome)
}

fn graph() -> impl Strategy<Value = AttributeGraph> {
    (3usize..=7)
        .prop_flat_map(|d| (prop::collection::vec(role(), d), prop::collection::vec(0u8..20, d * (d - 1) / 2)))
        .prop_map(|(roles, w)| {
            let d = roles.len();
            let w = w.into_iter().map(f64::from).collect();
            AttributeGraph::from_weights((0..d).map(|i| format!("a{i}")).collect(), roles, w).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn noiseless_selectors_are_ordered(g in graph()) {
        let greedy = match greedy_fair_tree(&g, None) {
            Ok(t) => t,
            Err(e) => {
                prop_assert!(matches!(e, Error::NoCandidateEdge));
                prop_assert!(greedy_blocked(g.roles()));
                return Ok(());
            }
        };
        prop_assert!(!greedy_blocked(g.roles()));
        let base = unconstrained_tree(&g, None).unwrap();
        prop_assert!(is_fair_tree(&greedy, g.roles()).unwrap());
        prop_assert_eq!(base.total_weight(), kruskal_max(&g).unwrap().total_weight());
        match branch_and_bound_fair_tree(&g, u64::MAX).unwrap() {
            Some(best) => {
                let opt = optimal_fair_tree(&g, None, SearchConfig::default()).unwrap().tree;
                prop_assert!(is_fair_tree(&opt, g.roles()).unwrap());
                prop_assert_eq!(opt.total_weight(), best.total_weight());
                prop_assert!(greedy.total_weight() <= opt.total_weight());
                prop_assert!(opt.total_weight() <= base.total_weight());
            }
            None => prop_assert!(optimal_fair_tree(&g, None, SearchConfig::default()).is_err()),
        }
    }

    #[test]
    fn noisy_selectors_stay_fair(g in graph(), rho in 1e-4f64..10.0, seed in 0u64..10_000) {
        let mut rng = RngSeed(seed).stream("noise");
        let mut acc = RdpAccountant::new();
        let ctx = PrivacyContext { rho, sensitivity: 1.0, rng: &mut rng, accountant: &mut acc };
        if let Ok(t) = greedy_fair_tree(&g, Some(ctx)) {
            prop_assert!(is_fair_tree(&t, g.roles()).unwrap());
            prop_assert!((acc.total_rho() - rho).abs() <= 1e-12);
        } else {
            prop_assert!(greedy_blocked(g.roles()));
        }

        let mut acc = RdpAccountant::new();
        let ctx = PrivacyContext { rho, sensitivity: 1.0, rng: &mut rng, accountant: &mut acc };
        if let Ok(o) = optimal_fair_tree(&g, Some(ctx), SearchConfig::default()) {
            prop_assert!(is_fair_tree(&o.tree, g.roles()).unwrap());
            prop_assert!((acc.total_rho() - rho).abs() <= 1e-12);
        }
    }
}
