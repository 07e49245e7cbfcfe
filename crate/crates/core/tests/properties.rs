use proptest::prelude::*;

use replica_placement::aggregate::{add, lex_compare, subtract, CompactAggregate};
use replica_placement::evaluator::{
    failure_aggregate, failure_number, monotonicity_check, path_aggregate, FailureDag, FailureModel,
};
use replica_placement::model::generate_random_tree;
use replica_placement::oracles::greedy_order;
use replica_placement::placement::Placement;
use replica_placement::solver::{fill_invariant_holds, get_filled, FillClassification};
use replica_placement::{FailureTree, NodeId};

fn vec_strategy() -> impl Strategy<Value = Vec<i64>> {
    (1usize..6).prop_flat_map(|len| prop::collection::vec(-4i64..5, len))
}

fn compact(v: Vec<i64>) -> CompactAggregate {
    CompactAggregate::from_entries(v)
}

/// A random tree and a random placement on it.
fn tree_and_placement() -> impl Strategy<Value = (FailureTree, Placement)> {
    (1usize..40, 1usize..5, any::<u64>(), any::<u64>()).prop_map(|(n, k, seed, pick)| {
        let tree = generate_random_tree(n, k, seed).unwrap();
        let leaves = tree.leaves().to_vec();
        let chosen = leaves
            .iter()
            .enumerate()
            .filter(|(i, _)| (pick >> (i % 64)) & 1 == 1)
            .map(|(_, &l)| l);
        let p = Placement::new(&tree, chosen).unwrap();
        (tree, p)
    })
}

fn reference_fill(children: &[(NodeId, usize)], r: usize) -> FillClassification {
    let mut order: Vec<usize> = (0..children.len()).collect();
    order.sort_by_key(|&i| (children[i].1, i));
    let m = children.len();
    let mut filled = vec![false; m];
    let mut used = 0;
    for (rank, &i) in order.iter().enumerate() {
        let left = m - rank;
        if children[i].1 * left < r - used {
            filled[i] = true;
            used += children[i].1;
        } else {
            break;
        }
    }
    let mut out = FillClassification {
        filled: Vec::new(),
        unfilled: Vec::new(),
        filled_leaves: used,
    };
    for (i, &(id, _)) in children.iter().enumerate() {
        if filled[i] {
            out.filled.push(id);
        } else {
            out.unfilled.push(id);
        }
    }
    out
}

proptest! {
    #[test]
    fn lex_order_is_total_and_antisymmetric(a in vec_strategy(), b in vec_strategy()) {
        let (a, b) = (compact(a), compact(b));
        prop_assert_eq!(lex_compare(&a, &b), lex_compare(&b, &a).reverse());
    }

    #[test]
    fn lex_order_is_translation_invariant(a in vec_strategy(), b in vec_strategy(), c in vec_strategy()) {
        let (a, b, c) = (compact(a), compact(b), compact(c));
        prop_assert_eq!(lex_compare(&a, &b), lex_compare(&add(&a, &c), &add(&b, &c)));
    }

    #[test]
    fn addition_laws(a in vec_strategy(), b in vec_strategy(), c in vec_strategy()) {
        let (a, b, c) = (compact(a), compact(b), compact(c));
        prop_assert!(lex_compare(&add(&a, &b), &add(&b, &a)).is_eq());
        prop_assert!(lex_compare(&add(&add(&a, &b), &c), &add(&a, &add(&b, &c))).is_eq());
        let back = add(&subtract(&a, &b), &b);
        prop_assert!(lex_compare(&back, &a).is_eq());
    }

    #[test]
    fn aggregate_counts_every_node((tree, p) in tree_and_placement()) {
        let agg = failure_aggregate(&tree, &p).unwrap();
        prop_assert_eq!(agg.total(), tree.node_count() as u64);
        prop_assert_eq!(failure_number(&tree, tree.root(), &p).unwrap(), p.rho());
        prop_assert_eq!(agg.rho(), p.rho());
    }

    #[test]
    fn failure_numbers_shrink_downward((tree, p) in tree_and_placement()) {
        prop_assert_eq!(monotonicity_check(&tree, &p).unwrap(), None);
    }

    #[test]
    fn tree_and_graph_evaluation_agree((tree, p) in tree_and_placement()) {
        let dag = FailureDag::from_tree(&tree);
        prop_assert_eq!(dag.failure_aggregate(&p).unwrap(), failure_aggregate(&tree, &p).unwrap());
        for u in tree.nodes() {
            prop_assert_eq!(dag.failure_number(u, &p).unwrap(), failure_number(&tree, u, &p).unwrap());
        }
    }

    #[test]
    fn path_order_predicts_full_order((tree, p) in tree_and_placement(), i in any::<usize>(), j in any::<usize>()) {
        let free: Vec<NodeId> = tree.leaves().iter().copied().filter(|&l| !p.contains(l)).collect();
        prop_assume!(free.len() >= 2);
        let a = free[i % free.len()];
        let b = free[j % free.len()];
        let pa = path_aggregate(&tree, tree.root(), a, &p).unwrap();
        let pb = path_aggregate(&tree, tree.root(), b, &p).unwrap();
        let fa = failure_aggregate(&tree, &p.with(a)).unwrap();
        let fb = failure_aggregate(&tree, &p.with(b)).unwrap();
        prop_assert_eq!(pa.cmp(&pb), fa.cmp(&fb));
    }

    #[test]
    fn greedy_prefixes_stay_optimal(n in 1usize..18, k in 1usize..4, seed in any::<u64>()) {
        let tree = generate_random_tree(n, k, seed).unwrap();
        let leaves = tree.total_leaves();
        let (order, evals) = greedy_order(&tree, leaves).unwrap();
        prop_assert!(evals <= (leaves * leaves) as u64);
        for rho in 0..=leaves.min(8) {
            let prefix = Placement::new(&tree, order[..rho].iter().copied()).unwrap();
            let best = replica_placement::oracles::brute_force_place(&tree, rho).unwrap();
            prop_assert_eq!(failure_aggregate(&tree, &prefix).unwrap(), best.aggregate);
        }
    }

    #[test]
    fn get_filled_matches_sorting(caps in prop::collection::vec(1usize..9, 0..12), frac in 0.0f64..=1.0) {
        let children: Vec<(NodeId, usize)> =
            caps.iter().enumerate().map(|(i, &c)| (NodeId::new(i), c)).collect();
        let total: usize = caps.iter().sum();
        let r = (total as f64 * frac).round() as usize;
        let got = get_filled(&children, r).unwrap();
        prop_assert_eq!(&got, &reference_fill(&children, r));
        prop_assert!(fill_invariant_holds(&children, r, &got));
    }
}
