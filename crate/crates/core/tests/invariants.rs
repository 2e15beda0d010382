use mcts_bai::harness::random_tree_for;
use mcts_bai::tree::{complexity_term, ComplexityVariant};
use mcts_bai::{evaluate_tree, run, theorem1_bound, theorem3_bound, Algorithm, AlgorithmConfig, StopReason};
use proptest::prelude::*;

fn config(algorithm: Algorithm, epsilon: f64, delta: f64, repetition: u64) -> AlgorithmConfig {
    AlgorithmConfig {
        seed: 17,
        repetition,
        budget_cap: 200_000,
        ..AlgorithmConfig::new(algorithm, epsilon, delta)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn runs_are_well_formed(
        b in 2usize..5,
        d in 1usize..4,
        rep in 0u64..1000,
        algo in prop::sample::select(vec![Algorithm::Ugape, Algorithm::Lucb, Algorithm::Lucb2, Algorithm::Mlucb]),
        eps in prop::sample::select(vec![0.05, 0.1]),
    ) {
        let tree = random_tree_for(b, d, 5, rep).unwrap();
        let delta = 0.1 * tree.leaf_count() as f64;
        let r = run(&tree, &config(algo, eps, delta, rep)).unwrap();
        prop_assert!(tree.root_actions().contains(&r.recommendation));
        prop_assert_eq!(r.pulls.iter().sum::<u64>(), r.tau);
        prop_assert_eq!(r.nesting.1, 0);
        if algo == Algorithm::Lucb2 && r.stopped_by == StopReason::StoppingRule {
            prop_assert_eq!(r.tau % 2, 0);
        }
        let analysis = evaluate_tree(&tree);
        prop_assert_eq!(r.correct, analysis.is_epsilon_good(r.recommendation, eps));
    }

    #[test]
    fn same_seed_same_run(b in 2usize..4, d in 1usize..4, rep in 0u64..1000) {
        let tree = random_tree_for(b, d, 6, rep).unwrap();
        for algo in Algorithm::ALL {
            let c = AlgorithmConfig { zero_epsilon: mcts_bai::ZeroEpsilonPolicy::UntilSingleSurvivor, ..config(algo, 0.1, 0.5, rep) };
            prop_assert_eq!(run(&tree, &c).unwrap(), run(&tree, &c).unwrap());
        }
    }

    #[test]
    fn upper_bounds_shrink_with_delta(rep in 0u64..1000, eps in 0.01f64..0.2) {
        let tree = random_tree_for(3, 2, 7, rep).unwrap();
        let a = evaluate_tree(&tree);
        let l = tree.leaf_count();
        let (loose, tight) = (0.01, 0.2);
        prop_assert!(theorem1_bound(&a, eps, loose, l).unwrap() >= theorem1_bound(&a, eps, tight, l).unwrap());
        prop_assert!(theorem3_bound(&a, eps, loose, l).unwrap() >= theorem3_bound(&a, eps, tight, l).unwrap());
        let h = complexity_term(&a, eps, ComplexityVariant::Standard).unwrap();
        let h_tilde = complexity_term(&a, eps, ComplexityVariant::Tilde).unwrap();
        prop_assert!(h_tilde >= h);
        prop_assert!(h <= l as f64 / (eps * eps) + 1e-9);
    }
}

#[test]
fn fixed_budget_cap_is_honoured() {
    let tree = random_tree_for(3, 3, 9, 0).unwrap();
    for algo in Algorithm::ALL {
        let c = AlgorithmConfig {
            budget_cap: 500,
            zero_epsilon: mcts_bai::ZeroEpsilonPolicy::UntilSingleSurvivor,
            ..config(algo, 0.0, 0.1, 0)
        };
        let r = run(&tree, &c).unwrap();
        assert_eq!(r.stopped_by, StopReason::BudgetCap, "{algo}");
        assert!(r.tau <= 500 + 2, "{algo}: {}", r.tau);
    }
}

#[test]
fn larger_delta_never_costs_more_on_average() {
    let tree = mcts_bai::harness::BuiltinTree::Fig2.tree();
    let mean = |delta: f64| {
        (0..60)
            .map(|rep| run(&tree, &config(Algorithm::Lucb, 0.0, delta, rep)).unwrap().tau as f64)
            .sum::<f64>()
            / 60.0
    };
    assert!(mean(0.9) < mean(0.01));
}
