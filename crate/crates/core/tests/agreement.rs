use replica_placement::evaluator::{failure_aggregate, is_balanced};
use replica_placement::model::{generate_chain_heavy_tree, generate_small_tree};
use replica_placement::oracles::{brute_force_place, greedy_place, optimal_placements};
use replica_placement::solver::{solve, solve_with_report, Mode};
use replica_placement::{parse_topology, FailureTree};

fn check_all(tree: &FailureTree, label: &str) {
    for rho in 0..=tree.total_leaves() {
        let brute = brute_force_place(tree, rho).unwrap();
        let greedy = greedy_place(tree, rho).unwrap();
        let basic = solve(tree, rho, Mode::Basic).unwrap();
        let fast = solve(tree, rho, Mode::Fast).unwrap();
        for (name, out) in [("greedy", &greedy), ("basic", &basic), ("fast", &fast)] {
            assert_eq!(out.aggregate, brute.aggregate, "{label} rho={rho} {name}");
            assert_eq!(out.placement.rho(), rho);
            assert_eq!(
                failure_aggregate(tree, &out.placement).unwrap(),
                out.aggregate
            );
            assert!(is_balanced(tree, &out.placement).unwrap().is_balanced());
        }
    }
}

#[test]
fn small_random_trees_agree() {
    for seed in 1..=150 {
        let tree = generate_small_tree(30, 10, seed).unwrap();
        check_all(&tree, &format!("seed {seed}"));
    }
}

#[test]
fn chain_heavy_trees_agree() {
    for seed in 1..=60 {
        let tree = generate_chain_heavy_tree(25, seed).unwrap();
        if tree.total_leaves() > 12 {
            continue;
        }
        check_all(&tree, &format!("chain seed {seed}"));
    }
}

#[test]
fn fast_matches_basic_on_larger_chain_trees() {
    for seed in 1..=40 {
        let tree = generate_chain_heavy_tree(300, seed).unwrap();
        let leaves = tree.total_leaves();
        for rho in [
            1,
            2,
            3,
            leaves / 3,
            leaves / 2,
            leaves.saturating_sub(1),
            leaves,
        ] {
            let basic = solve(&tree, rho, Mode::Basic).unwrap();
            let fast = solve_with_report(&tree, rho, Mode::Fast).unwrap();
            assert_eq!(
                fast.outcome.aggregate, basic.aggregate,
                "seed {seed} rho {rho}"
            );
            assert_eq!(
                failure_aggregate(&tree, &fast.outcome.placement).unwrap(),
                basic.aggregate
            );
        }
    }
}

#[test]
fn every_optimum_is_balanced() {
    for seed in 1..=40 {
        let tree = generate_small_tree(20, 8, seed).unwrap();
        for rho in 1..=tree.total_leaves() {
            let (_, optima) = optimal_placements(&tree, rho, 1_000_000).unwrap();
            for p in optima {
                assert!(
                    is_balanced(&tree, &p).unwrap().is_balanced(),
                    "seed {seed} rho {rho}"
                );
            }
        }
    }
}

#[test]
fn deep_spine_does_not_recurse() {
    let mut text = String::new();
    for i in 0..200_000 {
        text.push_str(&format!("s{i} s{}\ns{i} x{i}\n", i + 1));
    }
    let tree = parse_topology(&text).unwrap();
    for mode in [Mode::Basic, Mode::Fast] {
        let out = solve(&tree, 3, mode).unwrap();
        assert_eq!(
            failure_aggregate(&tree, &out.placement).unwrap(),
            out.aggregate
        );
    }
}
