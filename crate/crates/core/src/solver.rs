//! Balanced divide/conquer solver.
//!
//! The divide phase walks the tree top-down. At every visited node it splits
//! the children into filled and unfilled ones and fixes the two replica
//! targets (`ceil`, `ceil - 1`) each unfilled child may receive. The conquer
//! phase runs bottom-up. Each visited node returns the optimal aggregates for
//! `r` and `r - 1` replicas. The parent sums them and hands the larger target
//! to the unfilled children whose `high - low` differences are
//! lexicographically smallest.
//!
//! [`Mode::Basic`] keeps full-length vectors and visits every node of each
//! unfilled subtree. [`Mode::Fast`] uses vectors truncated to the local replica
//! count. It also skips single-child runs, stops at `r = 1` with the
//! shallowest leaf, and folds degenerate chains into pseudonodes (see
//! [`crate::transform`]).

use std::cmp::Ordering;
use std::collections::HashMap;

use crate::aggregate::{lex_compare, subtract, AggregateDiff, CompactAggregate, LexVector};
use crate::error::{Error, Result};
use crate::evaluator::failure_aggregate;
use crate::model::{FailureTree, NodeId};
use crate::oracles::{check_rho, PlacerOutcome};
use crate::placement::Placement;
use crate::transform::{self, Pseudonode, UnaryContraction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Basic,
    Fast,
}

/// Children split by whether their subtrees end up full.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FillClassification {
    /// Filled children, in input order.
    pub filled: Vec<NodeId>,
    /// Unfilled children, in input order.
    pub unfilled: Vec<NodeId>,
    /// Total leaves under the filled children.
    pub filled_leaves: usize,
}

impl FillClassification {
    pub fn k(&self) -> usize {
        self.unfilled.len()
    }
}

/// Checks the terminal sandwich `max(F) < (r - L) / k <= min(U)` for the
/// sides that are non-empty.
pub fn fill_invariant_holds(
    children: &[(NodeId, usize)],
    r: usize,
    fill: &FillClassification,
) -> bool {
    let caps: HashMap<NodeId, usize> = children.iter().copied().collect();
    let cap = |id: NodeId| caps.get(&id).copied().unwrap_or(usize::MAX);
    let k = fill.k();
    if fill.filled.len() + k != children.len() {
        return false;
    }
    if fill.filled_leaves != fill.filled.iter().map(|&f| cap(f)).sum::<usize>() {
        return false;
    }
    if k == 0 {
        return children.is_empty() || r == fill.filled_leaves;
    }
    let Some(s) = r.checked_sub(fill.filled_leaves) else {
        return false;
    };
    let max_f = fill.filled.iter().map(|&f| cap(f)).max();
    let min_u = fill.unfilled.iter().map(|&u| cap(u)).min().unwrap_or(0);
    let lower_ok = max_f.is_none_or(|m| m * k < s);
    lower_ok && s <= min_u * k
}

/// Classifies children into filled and unfilled ones for `r` replicas in
/// linear expected time.
///
/// Each round takes the lower-median capacity among the unclassified
/// children. If the replicas left after filling everything at or below the
/// median would still average strictly more than the median over the rest,
/// those children are filled. Otherwise everything at or above the median is
/// unfilled. Each round settles at least half of the remaining children.
pub fn get_filled(children: &[(NodeId, usize)], r: usize) -> Result<FillClassification> {
    let total: usize = children.iter().map(|c| c.1).sum();
    if r > total {
        return Err(Error::ReplicasOutOfRange { rho: r, max: total });
    }
    let m = children.len();
    let mut status = vec![false; m]; // true = filled
    let mut pending: Vec<usize> = (0..m).collect();
    let mut filled_sum = 0usize;
    let mut unfilled_count = 0usize;

    while !pending.is_empty() {
        let mid = (pending.len() - 1) / 2;
        pending.select_nth_unstable_by_key(mid, |&i| children[i].1);
        let med = children[pending[mid]].1;
        let mut at_most_sum = 0usize;
        let mut above = 0usize;
        for &i in &pending {
            if children[i].1 <= med {
                at_most_sum += children[i].1;
            } else {
                above += 1;
            }
        }
        let x = r as i128 - (filled_sum + at_most_sum) as i128;
        if x > med as i128 * (unfilled_count + above) as i128 {
            for &i in &pending {
                if children[i].1 <= med {
                    status[i] = true;
                }
            }
            filled_sum += at_most_sum;
            pending.retain(|&i| children[i].1 > med);
        } else {
            let settled = pending.iter().filter(|&&i| children[i].1 >= med).count();
            unfilled_count += settled;
            pending.retain(|&i| children[i].1 < med);
        }
    }

    let mut fill = FillClassification {
        filled: Vec::new(),
        unfilled: Vec::with_capacity(unfilled_count),
        filled_leaves: filled_sum,
    };
    for (i, &(id, _)) in children.iter().enumerate() {
        if status[i] {
            fill.filled.push(id);
        } else {
            fill.unfilled.push(id);
        }
    }
    debug_assert!(fill_invariant_holds(children, r, &fill));
    Ok(fill)
}

/// The two per-child targets and how many unfilled children take the larger one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChildTargets {
    /// `ceil(s / k)` with `s = r - L`.
    pub ceil: usize,
    /// `floor((s - 1) / k)`, always `ceil - 1`.
    pub floor: usize,
    /// Children taking `ceil` when `s` replicas go to the unfilled children.
    pub high_count: usize,
    /// Children taking `ceil` when `s - 1` replicas go to the unfilled children.
    pub low_count: usize,
}

pub fn child_targets(r: usize, filled_leaves: usize, k: usize) -> Result<ChildTargets> {
    let s = r.saturating_sub(filled_leaves);
    if k == 0 || s == 0 {
        return Err(Error::Internal(format!(
            "child targets need s >= 1 and k >= 1 (r={r}, L={filled_leaves}, k={k})"
        )));
    }
    let ceil = s.div_ceil(k);
    let floor = (s - 1) / k;
    let high_count = s - k * floor;
    Ok(ChildTargets {
        ceil,
        floor,
        high_count,
        low_count: high_count - 1,
    })
}

fn rank_cmp<D: LexVector>(diffs: &[D], a: usize, b: usize) -> Ordering {
    lex_compare(&diffs[a], &diffs[b]).then(a.cmp(&b))
}

/// Indices of the `count` lexicographically smallest differences (ties by
/// index), returned in ascending index order.
pub fn conquer_select<D: LexVector>(diffs: &[D], count: usize) -> Vec<usize> {
    let k = diffs.len();
    let mut order: Vec<usize> = (0..k).collect();
    if count == 0 {
        return Vec::new();
    }
    if count < k {
        order.select_nth_unstable_by(count - 1, |&a, &b| rank_cmp(diffs, a, b));
        order.truncate(count);
    }
    order.sort_unstable();
    order
}

/// Splits off the `low_count` smallest differences and the next-ranked one.
fn rank_split<D: LexVector>(diffs: &[D], low_count: usize) -> (Vec<usize>, usize) {
    debug_assert!(low_count < diffs.len());
    let mut order: Vec<usize> = (0..diffs.len()).collect();
    order.select_nth_unstable_by(low_count, |&a, &b| rank_cmp(diffs, a, b));
    let extra = order[low_count];
    order.truncate(low_count);
    (order, extra)
}

/// Aggregate of a fully placed subtree: each internal node contributes at its
/// leaf count, each leaf at index one.
pub fn filled_aggregate(tree: &FailureTree, u: NodeId) -> CompactAggregate {
    let mut out = CompactAggregate::zeros(tree.leaf_count(u));
    add_filled_into(tree, u, &mut out);
    out
}

pub(crate) fn add_filled_into(tree: &FailureTree, u: NodeId, acc: &mut CompactAggregate) {
    debug_assert!(acc.capacity() >= tree.leaf_count(u));
    for &v in tree.subtree(u) {
        let idx = if tree.is_leaf(v) {
            1
        } else {
            tree.leaf_count(v)
        };
        acc.bump(idx).expect("capacity covers leaf count");
    }
}

/// Optimal aggregates of one subtree for `r` and `r - 1` replicas.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolveResult {
    pub high: CompactAggregate,
    pub low: CompactAggregate,
}

/// What the divide phase decided at a visited node.
#[derive(Debug, Clone)]
pub enum Step {
    Leaf,
    /// `r = 1` in fast mode: the shallowest leaf is optimal.
    Shallowest,
    Split {
        fill: FillClassification,
        targets: ChildTargets,
        /// Visit index of each unfilled child, aligned with `fill.unfilled`.
        unfilled_visits: Vec<usize>,
    },
}

/// A node reached by the divide phase with its replica target.
#[derive(Debug, Clone)]
pub struct Visit {
    pub node: NodeId,
    pub r: usize,
    /// Single-child nodes folded into the edge above `node` (fast mode).
    pub edge_interior: usize,
    pub parent: Option<usize>,
    pub step: Step,
}

impl Visit {
    pub fn is_chain_link(&self) -> bool {
        matches!(&self.step, Step::Split { fill, .. } if fill.k() == 1)
    }
}

/// Conquer decision at a split: which unfilled children take `ceil`.
#[derive(Debug, Clone)]
pub struct Choice {
    /// Per unfilled child: takes `ceil` in the `r - 1` solution.
    pub ceil_in_low: Vec<bool>,
    /// The additional child taking `ceil` in the `r` solution.
    pub extra: usize,
}

/// Per-visit summary suitable for trace output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VisitTrace {
    pub node: NodeId,
    pub r: usize,
    pub filled_leaves: usize,
    pub k: usize,
    pub ceil: usize,
    pub floor: usize,
    pub parent: Option<usize>,
    /// Folded into a pseudonode (fast mode).
    pub in_chain: bool,
}

/// Summary of one contracted degenerate chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainSummary {
    pub head: NodeId,
    /// Chain length: `t - 1` nodes were contracted above the terminal.
    pub t: usize,
    pub size: usize,
    pub r: usize,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub outcome: PlacerOutcome,
    pub visits: Vec<VisitTrace>,
    pub chains: Vec<ChainSummary>,
    /// Accumulator vectors allocated by the chain transform.
    pub accumulator_allocations: usize,
}

impl SolveReport {
    pub fn trace_lines(&self, tree: &FailureTree) -> Vec<String> {
        let mut lines: Vec<String> = self
            .visits
            .iter()
            .map(|v| {
                format!(
                    "node={} r={} L={} k={} ceil={} floor={}",
                    tree.name(v.node),
                    v.r,
                    v.filled_leaves,
                    v.k,
                    v.ceil,
                    v.floor
                )
            })
            .collect();
        lines.extend(self.chains.iter().map(|c| {
            format!(
                "chain v1={} t={} |S_w|={} r={}",
                tree.name(c.head),
                c.t,
                c.size,
                c.r
            )
        }));
        lines
    }
}

/// Divide phase: breadth-first over the nodes that receive replicas.
pub(crate) fn divide(
    tree: &FailureTree,
    rho: usize,
    mode: Mode,
    contraction: Option<&UnaryContraction>,
) -> Result<Vec<Visit>> {
    let mut visits = vec![Visit {
        node: tree.root(),
        r: rho,
        edge_interior: 0,
        parent: None,
        step: Step::Leaf,
    }];
    let mut caps: Vec<(NodeId, usize)> = Vec::new();
    let mut i = 0;
    while i < visits.len() {
        let (u, r) = (visits[i].node, visits[i].r);
        let step = if tree.is_leaf(u) {
            if r != 1 {
                return Err(Error::Internal(format!(
                    "leaf `{}` asked for {r}",
                    tree.name(u)
                )));
            }
            Step::Leaf
        } else if mode == Mode::Fast && r == 1 {
            Step::Shallowest
        } else {
            caps.clear();
            caps.extend(tree.children(u).iter().map(|&c| (c, tree.leaf_count(c))));
            let fill = get_filled(&caps, r)?;
            let targets = child_targets(r, fill.filled_leaves, fill.k())?;
            let mut unfilled_visits = Vec::with_capacity(fill.k());
            for &c in &fill.unfilled {
                let (node, edge_interior) = match contraction {
                    Some(x) => x.skip(c),
                    None => (c, 0),
                };
                unfilled_visits.push(visits.len());
                visits.push(Visit {
                    node,
                    r: targets.ceil,
                    edge_interior,
                    parent: Some(i),
                    step: Step::Leaf,
                });
            }
            Step::Split {
                fill,
                targets,
                unfilled_visits,
            }
        };
        visits[i].step = step;
        i += 1;
    }
    Ok(visits)
}

fn conquer_split(
    tree: &FailureTree,
    visit: &Visit,
    capacity: usize,
    children: Vec<SolveResult>,
) -> Result<(SolveResult, Choice)> {
    let Step::Split { fill, targets, .. } = &visit.step else {
        unreachable!("conquer_split on a non-split visit");
    };
    let mut low = CompactAggregate::zeros(capacity);
    for &f in &fill.filled {
        add_filled_into(tree, f, &mut low);
    }
    let diffs: Vec<AggregateDiff> = children.iter().map(|c| subtract(&c.high, &c.low)).collect();
    for c in &children {
        low.add_assign(&c.low);
    }
    let (low_set, extra) = rank_split(&diffs, targets.low_count);
    let mut ceil_in_low = vec![false; diffs.len()];
    for j in low_set {
        low.add_assign(&diffs[j]);
        ceil_in_low[j] = true;
    }
    let mut high = low.clone();
    high.add_assign(&diffs[extra]);
    let own = 1 + visit.edge_interior as i64;
    low.bump_by(visit.r - 1, own)?;
    high.bump_by(visit.r, own)?;
    Ok((SolveResult { high, low }, Choice { ceil_in_low, extra }))
}

fn conquer_leafward(tree: &FailureTree, visit: &Visit, capacity: usize) -> Result<SolveResult> {
    let own = 1 + visit.edge_interior as i64;
    let mut high = CompactAggregate::zeros(capacity);
    let mut low = CompactAggregate::zeros(capacity);
    match visit.step {
        Step::Leaf => {
            high.bump_by(1, own)?;
            low.bump_by(0, own)?;
        }
        Step::Shallowest => {
            let size = tree.subtree_size(visit.node) as i64;
            let on_path = tree.min_leaf_depth(visit.node) as i64 + 1;
            high.bump_by(1, on_path + visit.edge_interior as i64)?;
            high.bump_by(0, size - on_path)?;
            low.bump_by(0, size + visit.edge_interior as i64)?;
        }
        Step::Split { .. } => unreachable!("split handled by conquer_split"),
    }
    Ok(SolveResult { high, low })
}

pub fn solve(tree: &FailureTree, rho: usize, mode: Mode) -> Result<PlacerOutcome> {
    solve_with_report(tree, rho, mode).map(|r| r.outcome)
}

/// Runs the solver and returns the outcome together with its visit trace.
pub fn solve_with_report(tree: &FailureTree, rho: usize, mode: Mode) -> Result<SolveReport> {
    check_rho(tree, rho)?;
    if rho == 0 {
        let mut counts = vec![0u64; 1];
        counts[0] = tree.node_count() as u64;
        return Ok(SolveReport {
            outcome: PlacerOutcome {
                placement: Placement::empty(),
                aggregate: crate::aggregate::FailureAggregate::from_ascending(counts),
                evaluations: 0,
            },
            visits: Vec::new(),
            chains: Vec::new(),
            accumulator_allocations: 0,
        });
    }

    let contraction = match mode {
        Mode::Fast => Some(transform::contract_unary_paths(tree)),
        Mode::Basic => None,
    };
    let visits = divide(tree, rho, mode, contraction.as_ref())?;

    let (pseudonodes, accumulator_allocations) = match mode {
        Mode::Fast => {
            let chains = transform::find_degenerate_chains(&visits);
            transform::transform_chains(tree, &visits, &chains)
        }
        Mode::Basic => (Vec::new(), 0),
    };
    let mut chain_role: Vec<Option<usize>> = vec![None; visits.len()];
    let mut in_chain = vec![false; visits.len()];
    for (p, pn) in pseudonodes.iter().enumerate() {
        chain_role[pn.head_visit] = Some(p);
        for &m in &pn.member_visits {
            in_chain[m] = true;
        }
    }

    let mut results: Vec<Option<SolveResult>> = vec![None; visits.len()];
    let mut choices: Vec<Option<Choice>> = vec![None; visits.len()];
    for vi in (0..visits.len()).rev() {
        let visit = &visits[vi];
        let capacity = match mode {
            Mode::Basic => rho,
            Mode::Fast => visit.r,
        };
        if let Some(p) = chain_role[vi] {
            let pn: &Pseudonode = &pseudonodes[p];
            let terminal = results[pn.terminal_visit]
                .take()
                .ok_or_else(|| Error::Internal("chain terminal not solved".into()))?;
            results[vi] = Some(pn.combine(&terminal));
            continue;
        }
        if in_chain[vi] {
            continue;
        }
        let result = match &visit.step {
            Step::Split {
                unfilled_visits, ..
            } => {
                let kids = unfilled_visits
                    .iter()
                    .map(|&c| {
                        results[c]
                            .take()
                            .ok_or_else(|| Error::Internal("child solved out of order".into()))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let (res, choice) = conquer_split(tree, visit, capacity, kids)?;
                choices[vi] = Some(choice);
                res
            }
            _ => conquer_leafward(tree, visit, capacity)?,
        };
        results[vi] = Some(result);
    }

    let root = results[0]
        .take()
        .ok_or_else(|| Error::Internal("root not solved".into()))?;
    let aggregate = root.high.expand(rho)?;
    let placement = transform::expand_solution(tree, &visits, &choices, &pseudonodes)?;
    if placement.rho() != rho {
        return Err(Error::Internal(format!(
            "reconstructed {} replicas, expected {rho}",
            placement.rho()
        )));
    }
    debug_assert_eq!(
        failure_aggregate(tree, &placement).ok().as_ref(),
        Some(&aggregate),
        "reconstructed placement disagrees with the computed aggregate"
    );

    let traces = visits
        .iter()
        .enumerate()
        .map(|(vi, v)| {
            let (filled_leaves, k, ceil, floor) = match &v.step {
                Step::Split { fill, targets, .. } => {
                    (fill.filled_leaves, fill.k(), targets.ceil, targets.floor)
                }
                _ => (0, 0, 0, 0),
            };
            VisitTrace {
                node: v.node,
                r: v.r,
                filled_leaves,
                k,
                ceil,
                floor,
                parent: v.parent,
                in_chain: in_chain[vi],
            }
        })
        .collect();
    let chains = pseudonodes
        .iter()
        .map(|pn| ChainSummary {
            head: pn.original_chain[0],
            t: pn.original_chain.len() + 1,
            size: pn.size,
            r: pn.r_head,
        })
        .collect();

    Ok(SolveReport {
        outcome: PlacerOutcome {
            placement,
            aggregate,
            evaluations: visits.len() as u64,
        },
        visits: traces,
        chains,
        accumulator_allocations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_topology;

    fn caps(ls: &[usize]) -> Vec<(NodeId, usize)> {
        ls.iter()
            .enumerate()
            .map(|(i, &l)| (NodeId::new(i), l))
            .collect()
    }

    fn ids(v: &[usize]) -> Vec<NodeId> {
        v.iter().map(|&i| NodeId::new(i)).collect()
    }

    #[test]
    fn get_filled_examples() {
        let f = get_filled(&caps(&[5, 1]), 4).unwrap();
        assert_eq!(f.filled, ids(&[1]));
        assert_eq!(f.unfilled, ids(&[0]));
        assert_eq!((f.filled_leaves, f.k()), (1, 1));

        let f = get_filled(&caps(&[1, 1, 1]), 2).unwrap();
        assert!(f.filled.is_empty());
        assert_eq!(f.unfilled, ids(&[0, 1, 2]));

        // Exact capacity: the largest children stay in U and receive ceil = capacity.
        let f = get_filled(&caps(&[2, 2]), 4).unwrap();
        assert!(f.filled.is_empty());
        let t = child_targets(4, f.filled_leaves, f.k()).unwrap();
        assert_eq!((t.ceil, t.high_count), (2, 2));

        assert!(get_filled(&caps(&[1, 2]), 4).is_err());
    }

    #[test]
    fn ties_at_the_average_stay_unfilled() {
        // With r = 2 over capacities [1, 5] the capacity-1 child sits exactly at the
        // average; keeping it unfilled lets the r - 1 solution drop its replica.
        let f = get_filled(&caps(&[1, 5]), 2).unwrap();
        assert_eq!(f.unfilled, ids(&[0, 1]));
    }

    #[test]
    fn child_target_arithmetic() {
        let t = child_targets(4, 0, 3).unwrap();
        assert_eq!((t.ceil, t.floor, t.high_count, t.low_count), (2, 1, 1, 0));
        let t = child_targets(6, 0, 3).unwrap();
        assert_eq!((t.ceil, t.floor, t.high_count, t.low_count), (2, 1, 3, 2));
        let t = child_targets(1, 0, 1).unwrap();
        assert_eq!((t.ceil, t.floor, t.high_count, t.low_count), (1, 0, 1, 0));
        assert!(child_targets(3, 3, 1).is_err());
        assert!(child_targets(3, 0, 0).is_err());
    }

    #[test]
    fn conquer_select_examples() {
        let d = |v: &[i64]| {
            let mut e = v.to_vec();
            e.reverse();
            CompactAggregate::from_entries(e)
        };
        let diffs = [d(&[0, 1]), d(&[0, -1]), d(&[1, 0])];
        assert_eq!(conquer_select(&diffs, 1), vec![1]);
        assert!(conquer_select(&diffs, 0).is_empty());
        assert_eq!(conquer_select(&diffs, 3), vec![0, 1, 2]);
        // ties resolve to the smaller index
        let tied = [d(&[0, 0]), d(&[0, 0]), d(&[0, 0])];
        assert_eq!(conquer_select(&tied, 2), vec![0, 1]);
    }

    #[test]
    fn filled_aggregates() {
        let t = parse_topology("p a\np b\nq x\nr q\nr p").unwrap();
        let leaf = t.id("a").unwrap();
        assert_eq!(filled_aggregate(&t, leaf).entries(), &[0, 1]);
        let p = t.id("p").unwrap();
        assert_eq!(filled_aggregate(&t, p).entries(), &[0, 2, 1]);

        let chain = parse_topology("u v\nv w").unwrap();
        assert_eq!(filled_aggregate(&chain, chain.root()).entries(), &[0, 3]);
    }

    #[test]
    fn t13_both_modes() {
        let t = parse_topology(
            "root A\nroot B\nA A1\nA a2\nA1 l1\nA1 l2\nB b1\nB b2\nB b3\nB b4\nB b5\nB b6\n",
        )
        .unwrap();
        for mode in [Mode::Basic, Mode::Fast] {
            let out = solve(&t, 3, mode).unwrap();
            assert_eq!(out.aggregate.to_string(), "<1,1,4,7>", "{mode:?}");
            assert_eq!(
                failure_aggregate(&t, &out.placement).unwrap(),
                out.aggregate
            );
        }
    }

    #[test]
    fn star_full_and_zero() {
        let t = parse_topology("h a\nh b\nh c\nh d").unwrap();
        for mode in [Mode::Basic, Mode::Fast] {
            assert_eq!(
                solve(&t, 4, mode).unwrap().aggregate.to_string(),
                "<1,0,0,4,0>"
            );
            let zero = solve(&t, 0, mode).unwrap();
            assert_eq!(zero.aggregate.to_string(), "<5>");
            assert!(zero.placement.is_empty());
            assert!(matches!(
                solve(&t, 5, mode),
                Err(Error::ReplicasOutOfRange { rho: 5, max: 4 })
            ));
        }
    }

    #[test]
    fn trace_format() {
        let t = parse_topology("r a\nr b\na x\na y\nb z").unwrap();
        let report = solve_with_report(&t, 2, Mode::Basic).unwrap();
        let lines = report.trace_lines(&t);
        assert_eq!(lines[0], "node=r r=2 L=0 k=2 ceil=1 floor=0");
    }
}
