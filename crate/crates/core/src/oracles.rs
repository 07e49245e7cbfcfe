//! Reference placers: exhaustive search, the greedy leaf-by-leaf placer, and
//! the round-robin heuristic.

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::aggregate::FailureAggregate;
use crate::error::{Error, Result};
use crate::evaluator::failure_aggregate;
use crate::model::{FailureTree, NodeId};
use crate::placement::Placement;

pub const DEFAULT_BRUTE_BUDGET: u64 = 10_000_000;

/// A placement together with its aggregate and the work spent finding it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlacerOutcome {
    pub placement: Placement,
    pub aggregate: FailureAggregate,
    /// Candidate evaluations (brute force, greedy) or node visits (other placers).
    pub evaluations: u64,
}

pub(crate) fn check_rho(tree: &FailureTree, rho: usize) -> Result<()> {
    let max = tree.total_leaves();
    if rho > max {
        return Err(Error::ReplicasOutOfRange { rho, max });
    }
    Ok(())
}

/// `n choose k`, saturating at `u128::MAX`.
pub fn combination_count(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Walks all `k`-subsets of `0..n` in lexicographic order.
struct Combinations {
    n: usize,
    idx: Vec<usize>,
    first: bool,
}

impl Combinations {
    fn new(n: usize, k: usize) -> Self {
        Combinations {
            n,
            idx: (0..k).collect(),
            first: true,
        }
    }

    fn advance(&mut self) -> Option<&[usize]> {
        if self.first {
            self.first = false;
            return Some(&self.idx);
        }
        let k = self.idx.len();
        let mut i = k;
        while i > 0 {
            i -= 1;
            if self.idx[i] < self.n - k + i {
                self.idx[i] += 1;
                for j in i + 1..k {
                    self.idx[j] = self.idx[j - 1] + 1;
                }
                return Some(&self.idx);
            }
        }
        None
    }
}

fn enumerate(
    tree: &FailureTree,
    rho: usize,
    budget: u64,
    mut visit: impl FnMut(&[NodeId], &FailureAggregate),
) -> Result<u64> {
    check_rho(tree, rho)?;
    let leaves = tree.leaves();
    let combos = combination_count(leaves.len(), rho);
    if combos > budget as u128 {
        return Err(Error::BudgetExceeded {
            combinations: combos,
            budget,
        });
    }
    let mut chosen = Vec::with_capacity(rho);
    let mut counts = vec![0u32; tree.node_count()];
    let mut evaluations = 0;
    let mut combos_iter = Combinations::new(leaves.len(), rho);
    while let Some(idx) = combos_iter.advance() {
        chosen.clear();
        chosen.extend(idx.iter().map(|&i| leaves[i]));
        counts.fill(0);
        for &l in &chosen {
            counts[l.index()] = 1;
        }
        let mut agg = FailureAggregate::zeros(rho);
        for &u in tree.preorder().iter().rev() {
            let c = counts[u.index()];
            agg.increment(c as usize);
            if let Some(p) = tree.parent(u) {
                counts[p.index()] += c;
            }
        }
        evaluations += 1;
        visit(&chosen, &agg);
    }
    Ok(evaluations)
}

pub fn brute_force_place(tree: &FailureTree, rho: usize) -> Result<PlacerOutcome> {
    brute_force_place_with_budget(tree, rho, DEFAULT_BRUTE_BUDGET)
}

/// Exhaustive search; ties go to the lexicographically smallest sorted leaf sequence.
pub fn brute_force_place_with_budget(
    tree: &FailureTree,
    rho: usize,
    budget: u64,
) -> Result<PlacerOutcome> {
    let mut best: Option<(Vec<NodeId>, FailureAggregate)> = None;
    let evaluations = enumerate(tree, rho, budget, |chosen, agg| {
        let better = match &best {
            None => true,
            Some((_, b)) => agg.cmp(b) == Ordering::Less,
        };
        if better {
            best = Some((chosen.to_vec(), agg.clone()));
        }
    })?;
    let (leaves, aggregate) = best.expect("at least one combination");
    Ok(PlacerOutcome {
        placement: Placement::from_sorted_unchecked(leaves),
        aggregate,
        evaluations,
    })
}

/// Every placement attaining the optimum, in enumeration order.
pub fn optimal_placements(
    tree: &FailureTree,
    rho: usize,
    budget: u64,
) -> Result<(FailureAggregate, Vec<Placement>)> {
    let mut best: Option<FailureAggregate> = None;
    let mut winners: Vec<Vec<NodeId>> = Vec::new();
    enumerate(tree, rho, budget, |chosen, agg| {
        let ord = best.as_ref().map_or(Ordering::Less, |b| agg.cmp(b));
        match ord {
            Ordering::Less => {
                best = Some(agg.clone());
                winners.clear();
                winners.push(chosen.to_vec());
            }
            Ordering::Equal => winners.push(chosen.to_vec()),
            Ordering::Greater => {}
        }
    })?;
    Ok((
        best.expect("at least one combination"),
        winners
            .into_iter()
            .map(Placement::from_sorted_unchecked)
            .collect(),
    ))
}

/// Leaves in the order the greedy placer picks them, plus the number of
/// candidate evaluations performed.
///
/// Each step ranks every unplaced leaf by the aggregate of its root path
/// under the current partial placement and takes the smallest (ties: lowest
/// index). Only the root path's failure numbers change when a leaf is added,
/// so this ranking agrees with ranking by full aggregates.
pub fn greedy_order(tree: &FailureTree, rho: usize) -> Result<(Vec<NodeId>, u64)> {
    check_rho(tree, rho)?;
    let mut counts = vec![0u32; tree.node_count()];
    let mut placed = vec![false; tree.node_count()];
    let mut order = Vec::with_capacity(rho);
    let mut best_hist = vec![0i64; rho + 1];
    let mut hist = vec![0i64; rho + 1];
    let mut evaluations = 0u64;

    for _ in 0..rho {
        let mut best: Option<NodeId> = None;
        for &q in tree.leaves() {
            if placed[q.index()] {
                continue;
            }
            evaluations += 1;
            hist.fill(0);
            let mut cur = Some(q);
            while let Some(v) = cur {
                hist[counts[v.index()] as usize] += 1;
                cur = tree.parent(v);
            }
            let better =
                best.is_none() || hist.iter().rev().cmp(best_hist.iter().rev()) == Ordering::Less;
            if better {
                best = Some(q);
                std::mem::swap(&mut hist, &mut best_hist);
            }
        }
        let q = best.expect("rho <= leaf count leaves a candidate");
        placed[q.index()] = true;
        order.push(q);
        let mut cur = Some(q);
        while let Some(v) = cur {
            counts[v.index()] += 1;
            cur = tree.parent(v);
        }
    }
    Ok((order, evaluations))
}

pub fn greedy_place(tree: &FailureTree, rho: usize) -> Result<PlacerOutcome> {
    let (order, evaluations) = greedy_order(tree, rho)?;
    let placement = Placement::new(tree, order)?;
    let aggregate = failure_aggregate(tree, &placement)?;
    Ok(PlacerOutcome {
        placement,
        aggregate,
        evaluations,
    })
}

/// Child visiting order used by [`round_robin_place`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RotationOrder {
    /// Children in input order.
    Forward,
    /// Children in reverse input order.
    Reverse,
    /// Children shuffled per node by a seeded generator.
    Shuffled(u64),
}

/// Hands replicas to children one at a time in rotation, skipping children
/// whose subtrees are full, then recurses. Balanced but not always optimal.
pub fn round_robin_place(
    tree: &FailureTree,
    rho: usize,
    order: RotationOrder,
) -> Result<PlacerOutcome> {
    check_rho(tree, rho)?;
    let mut rng = match order {
        RotationOrder::Shuffled(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        _ => None,
    };
    let mut chosen = Vec::with_capacity(rho);
    let mut visits = 0u64;
    let mut stack = vec![(tree.root(), rho)];
    let mut kids: Vec<NodeId> = Vec::new();
    let mut given: Vec<usize> = Vec::new();
    while let Some((u, t)) = stack.pop() {
        visits += 1;
        if t == 0 {
            continue;
        }
        if tree.is_leaf(u) {
            chosen.push(u);
            continue;
        }
        kids.clear();
        kids.extend_from_slice(tree.children(u));
        match order {
            RotationOrder::Forward => {}
            RotationOrder::Reverse => kids.reverse(),
            RotationOrder::Shuffled(_) => kids.shuffle(rng.as_mut().expect("seeded")),
        }
        given.clear();
        given.resize(kids.len(), 0);
        let mut left = t;
        while left > 0 {
            for (slot, &c) in kids.iter().enumerate() {
                if left == 0 {
                    break;
                }
                if given[slot] < tree.leaf_count(c) {
                    given[slot] += 1;
                    left -= 1;
                }
            }
        }
        for (slot, &c) in kids.iter().enumerate().rev() {
            stack.push((c, given[slot]));
        }
    }
    let placement = Placement::new(tree, chosen)?;
    let aggregate = failure_aggregate(tree, &placement)?;
    Ok(PlacerOutcome {
        placement,
        aggregate,
        evaluations: visits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluator::is_balanced;
    use crate::model::{generate_random_tree, parse_topology};

    const T13: &str =
        "root A\nroot B\nA A1\nA a2\nA1 l1\nA1 l2\nB b1\nB b2\nB b3\nB b4\nB b5\nB b6\n";

    fn star(k: usize) -> FailureTree {
        let text: String = (0..k).map(|i| format!("hub s{i}\n")).collect();
        parse_topology(&text).unwrap()
    }

    #[test]
    fn combination_counts() {
        assert_eq!(combination_count(9, 3), 84);
        assert_eq!(combination_count(12, 0), 1);
        assert_eq!(combination_count(3, 5), 0);
        assert_eq!(combination_count(1000, 500), u128::MAX);
    }

    #[test]
    fn brute_force_on_t13() {
        let t = parse_topology(T13).unwrap();
        let out = brute_force_place(&t, 3).unwrap();
        assert_eq!(out.aggregate.to_string(), "<1,1,4,7>");
        assert_eq!(out.evaluations, 84);
    }

    #[test]
    fn brute_force_edges() {
        let t = parse_topology(T13).unwrap();
        let full = brute_force_place(&t, 9).unwrap();
        assert_eq!(full.placement.leaves(), t.leaves());
        assert!(matches!(
            brute_force_place(&t, 10),
            Err(Error::ReplicasOutOfRange { rho: 10, max: 9 })
        ));
        assert!(matches!(
            brute_force_place_with_budget(&t, 4, 100),
            Err(Error::BudgetExceeded {
                combinations: 126,
                budget: 100
            })
        ));

        let s = star(5);
        let one = brute_force_place(&s, 1).unwrap();
        assert_eq!(one.aggregate.to_string(), "<2,4>");
    }

    #[test]
    fn greedy_matches_on_t13_and_paths() {
        let t = parse_topology(T13).unwrap();
        let g = greedy_place(&t, 3).unwrap();
        assert_eq!(g.aggregate.to_string(), "<1,1,4,7>");

        let path = parse_topology("a b\nb c\nc d").unwrap();
        let g = greedy_place(&path, 1).unwrap();
        assert_eq!(g.aggregate.to_string(), "<4,0>");
    }

    #[test]
    fn greedy_single_replica_takes_a_shallowest_leaf() {
        for seed in 0..30 {
            let t = generate_random_tree(30, 3, seed).unwrap();
            let (order, evals) = greedy_order(&t, 1).unwrap();
            assert_eq!(t.depth(order[0]), t.min_leaf_depth(t.root()));
            assert_eq!(evals as usize, t.total_leaves());
        }
    }

    #[test]
    fn round_robin_is_balanced_and_optimal_on_stars() {
        let s = star(6);
        for rho in 0..=6 {
            let rr = round_robin_place(&s, rho, RotationOrder::Reverse).unwrap();
            let bf = brute_force_place(&s, rho).unwrap();
            assert_eq!(rr.aggregate, bf.aggregate);
        }
        for seed in 0..40 {
            let t = generate_random_tree(25, 3, seed).unwrap();
            let rho = t.total_leaves().min(5);
            let rr = round_robin_place(&t, rho, RotationOrder::Shuffled(seed)).unwrap();
            assert_eq!(rr.placement.rho(), rho);
            assert!(is_balanced(&t, &rr.placement).unwrap().is_balanced());
        }
    }
}
