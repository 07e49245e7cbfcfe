//! Ground-truth evaluation of failure numbers and aggregates.
//!
//! Trees are evaluated with one post-order pass over subtree replica counts.
//! General directed graphs fall back to a traversal per vertex; they are
//! supported for evaluation only.

use std::collections::VecDeque;

use crate::aggregate::FailureAggregate;
use crate::error::{Error, Result};
use crate::model::{FailureTree, NodeId};
use crate::placement::Placement;

/// Aggregate restricted to a node subset (a root-to-node path here).
pub type PathAggregate = FailureAggregate;

/// Common evaluation surface for trees and general failure graphs.
pub trait FailureModel {
    fn vertex_count(&self) -> usize;
    /// Number of placed candidates reachable from `e`, counting `e` itself.
    fn failure_number(&self, e: NodeId, placement: &Placement) -> Result<usize>;
    /// Histogram of failure numbers over every vertex.
    fn failure_aggregate(&self, placement: &Placement) -> Result<FailureAggregate>;
}

fn check_tree_placement(tree: &FailureTree, placement: &Placement) -> Result<()> {
    for &l in placement.leaves() {
        if l.index() >= tree.node_count() {
            return Err(Error::UnknownNode(l.to_string()));
        }
        if !tree.is_leaf(l) {
            return Err(Error::NotALeaf(tree.name(l).to_string()));
        }
    }
    Ok(())
}

/// Replicas in each node's subtree, indexed by node.
pub fn subtree_replica_counts(tree: &FailureTree, placement: &Placement) -> Vec<u32> {
    let mut counts = vec![0u32; tree.node_count()];
    for &l in placement.leaves() {
        counts[l.index()] = 1;
    }
    for &u in tree.preorder().iter().rev() {
        if let Some(p) = tree.parent(u) {
            counts[p.index()] += counts[u.index()];
        }
    }
    counts
}

pub fn failure_number(tree: &FailureTree, e: NodeId, placement: &Placement) -> Result<usize> {
    if e.index() >= tree.node_count() {
        return Err(Error::UnknownNode(e.to_string()));
    }
    check_tree_placement(tree, placement)?;
    Ok(placement
        .leaves()
        .iter()
        .filter(|&&l| tree.is_ancestor_or_self(e, l))
        .count())
}

pub fn failure_aggregate(tree: &FailureTree, placement: &Placement) -> Result<FailureAggregate> {
    check_tree_placement(tree, placement)?;
    let counts = subtree_replica_counts(tree, placement);
    let mut agg = FailureAggregate::zeros(placement.rho());
    for c in counts {
        agg.increment(c as usize);
    }
    Ok(agg)
}

/// Aggregate over the nodes on the downward path `from ..= to`.
pub fn path_aggregate(
    tree: &FailureTree,
    from: NodeId,
    to: NodeId,
    placement: &Placement,
) -> Result<PathAggregate> {
    for id in [from, to] {
        if id.index() >= tree.node_count() {
            return Err(Error::UnknownNode(id.to_string()));
        }
    }
    if !tree.is_ancestor_or_self(from, to) {
        return Err(Error::NotDescendant {
            from: tree.name(from).to_string(),
            to: tree.name(to).to_string(),
        });
    }
    check_tree_placement(tree, placement)?;
    let counts = subtree_replica_counts(tree, placement);
    let mut agg = FailureAggregate::zeros(placement.rho());
    let mut cur = to;
    loop {
        agg.increment(counts[cur.index()] as usize);
        if cur == from {
            break;
        }
        cur = tree.parent(cur).expect("path stays below `from`");
    }
    Ok(agg)
}

/// Outcome of the balance check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BalanceReport {
    Balanced,
    /// At `node`, `unfilled_child` holds fewer than `sibling`'s count minus one.
    Unbalanced {
        node: NodeId,
        unfilled_child: NodeId,
        sibling: NodeId,
    },
}

impl BalanceReport {
    pub fn is_balanced(&self) -> bool {
        matches!(self, BalanceReport::Balanced)
    }
}

/// A node is balanced when every unfilled child holds at least its siblings'
/// replica counts minus one. Nodes are checked in pre-order.
pub fn is_balanced(tree: &FailureTree, placement: &Placement) -> Result<BalanceReport> {
    check_tree_placement(tree, placement)?;
    let counts = subtree_replica_counts(tree, placement);
    for &u in tree.preorder() {
        let kids = tree.children(u);
        if kids.len() < 2 {
            continue;
        }
        let Some(&richest) = kids
            .iter()
            .max_by_key(|&&c| (counts[c.index()], std::cmp::Reverse(c)))
        else {
            continue;
        };
        let top = counts[richest.index()];
        for &c in kids {
            let r = counts[c.index()];
            let unfilled = (r as usize) < tree.leaf_count(c);
            if unfilled && r + 1 < top {
                return Ok(BalanceReport::Unbalanced {
                    node: u,
                    unfilled_child: c,
                    sibling: richest,
                });
            }
        }
    }
    Ok(BalanceReport::Balanced)
}

/// An edge where a child's failure number exceeds its parent's.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonotonicityViolation {
    pub parent: NodeId,
    pub child: NodeId,
}

/// Checks `f(child) <= f(parent)` on every edge; returns the first violation.
pub fn monotonicity_check(
    tree: &FailureTree,
    placement: &Placement,
) -> Result<Option<MonotonicityViolation>> {
    check_tree_placement(tree, placement)?;
    let counts = subtree_replica_counts(tree, placement);
    for &u in tree.preorder() {
        for &c in tree.children(u) {
            if counts[c.index()] > counts[u.index()] {
                return Ok(Some(MonotonicityViolation {
                    parent: u,
                    child: c,
                }));
            }
        }
    }
    Ok(None)
}

impl FailureModel for FailureTree {
    fn vertex_count(&self) -> usize {
        self.node_count()
    }

    fn failure_number(&self, e: NodeId, placement: &Placement) -> Result<usize> {
        failure_number(self, e, placement)
    }

    fn failure_aggregate(&self, placement: &Placement) -> Result<FailureAggregate> {
        failure_aggregate(self, placement)
    }
}

/// General failure graph: events and candidates joined by directed edges.
/// Cycles among events are allowed; candidates have no outgoing edges.
#[derive(Debug, Clone)]
pub struct FailureDag {
    names: Vec<String>,
    out: Vec<Vec<NodeId>>,
    candidate: Vec<bool>,
}

impl FailureDag {
    pub fn new(names: Vec<String>, edges: &[(usize, usize)], candidates: &[usize]) -> Result<Self> {
        let n = names.len();
        let mut out = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidTree(format!("edge ({a}, {b}) out of range")));
            }
            out[a].push(NodeId::new(b));
        }
        let mut candidate = vec![false; n];
        for &c in candidates {
            if c >= n {
                return Err(Error::UnknownNode(c.to_string()));
            }
            if !out[c].is_empty() {
                return Err(Error::InvalidTree(format!(
                    "candidate `{}` has outgoing edges",
                    names[c]
                )));
            }
            candidate[c] = true;
        }
        Ok(FailureDag {
            names,
            out,
            candidate,
        })
    }

    /// Same vertices and edges as `tree`, with its leaves as candidates.
    pub fn from_tree(tree: &FailureTree) -> Self {
        let names = tree.nodes().map(|u| tree.name(u).to_string()).collect();
        let out = tree.nodes().map(|u| tree.children(u).to_vec()).collect();
        let candidate = tree.nodes().map(|u| tree.is_leaf(u)).collect();
        FailureDag {
            names,
            out,
            candidate,
        }
    }

    pub fn name(&self, v: NodeId) -> &str {
        &self.names[v.index()]
    }

    pub fn id(&self, name: &str) -> Option<NodeId> {
        self.names.iter().position(|n| n == name).map(NodeId::new)
    }

    pub fn is_candidate(&self, v: NodeId) -> bool {
        self.candidate[v.index()]
    }

    fn check(&self, placement: &Placement) -> Result<()> {
        for &p in placement.leaves() {
            if p.index() >= self.names.len() {
                return Err(Error::UnknownNode(p.to_string()));
            }
            if !self.candidate[p.index()] {
                return Err(Error::NotALeaf(self.names[p.index()].clone()));
            }
        }
        Ok(())
    }

    fn count_reachable(&self, e: NodeId, placed: &[bool], seen: &mut [bool]) -> usize {
        seen.fill(false);
        let mut queue = VecDeque::from([e]);
        seen[e.index()] = true;
        let mut hits = 0;
        while let Some(v) = queue.pop_front() {
            if placed[v.index()] {
                hits += 1;
            }
            for &w in &self.out[v.index()] {
                if !seen[w.index()] {
                    seen[w.index()] = true;
                    queue.push_back(w);
                }
            }
        }
        hits
    }

    fn placed_mask(&self, placement: &Placement) -> Vec<bool> {
        let mut placed = vec![false; self.names.len()];
        for &p in placement.leaves() {
            placed[p.index()] = true;
        }
        placed
    }
}

impl FailureModel for FailureDag {
    fn vertex_count(&self) -> usize {
        self.names.len()
    }

    fn failure_number(&self, e: NodeId, placement: &Placement) -> Result<usize> {
        if e.index() >= self.names.len() {
            return Err(Error::UnknownNode(e.to_string()));
        }
        self.check(placement)?;
        let placed = self.placed_mask(placement);
        let mut seen = vec![false; self.names.len()];
        Ok(self.count_reachable(e, &placed, &mut seen))
    }

    fn failure_aggregate(&self, placement: &Placement) -> Result<FailureAggregate> {
        self.check(placement)?;
        let placed = self.placed_mask(placement);
        let mut seen = vec![false; self.names.len()];
        let mut agg = FailureAggregate::zeros(placement.rho());
        for v in 0..self.names.len() {
            agg.increment(self.count_reachable(NodeId::new(v), &placed, &mut seen));
        }
        Ok(agg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_topology;

    const T13: &str =
        "root A\nroot B\nA A1\nA a2\nA1 l1\nA1 l2\nB b1\nB b2\nB b3\nB b4\nB b5\nB b6\n";

    fn t13() -> FailureTree {
        parse_topology(T13).unwrap()
    }

    #[test]
    fn t13_printed_aggregates() {
        let t = t13();
        let p1 = Placement::from_names(&t, ["l1", "l2", "a2"]).unwrap();
        let p2 = Placement::from_names(&t, ["a2", "b1", "b2"]).unwrap();
        assert_eq!(failure_aggregate(&t, &p1).unwrap().to_string(), "<2,1,3,7>");
        assert_eq!(failure_aggregate(&t, &p2).unwrap().to_string(), "<1,1,4,7>");
        assert_eq!(
            failure_aggregate(&t, &Placement::empty())
                .unwrap()
                .to_string(),
            "<13>"
        );
    }

    #[test]
    fn failure_numbers_are_reflexive() {
        let t = t13();
        let p = Placement::from_names(&t, ["a2"]).unwrap();
        assert_eq!(failure_number(&t, t.id("a2").unwrap(), &p).unwrap(), 1);
        assert_eq!(failure_number(&t, t.id("B").unwrap(), &p).unwrap(), 0);
        assert_eq!(failure_number(&t, t.root(), &p).unwrap(), 1);
    }

    #[test]
    fn balance_verdicts() {
        let t = t13();
        let p2 = Placement::from_names(&t, ["a2", "b1", "b2"]).unwrap();
        assert!(is_balanced(&t, &p2).unwrap().is_balanced());

        let p1 = Placement::from_names(&t, ["l1", "l2", "a2"]).unwrap();
        match is_balanced(&t, &p1).unwrap() {
            BalanceReport::Unbalanced {
                node,
                unfilled_child,
                sibling,
            } => {
                assert_eq!(node, t.root());
                assert_eq!(t.name(unfilled_child), "B");
                assert_eq!(t.name(sibling), "A");
            }
            BalanceReport::Balanced => panic!("P1 is unbalanced at the root"),
        }
        assert!(is_balanced(&t, &Placement::empty()).unwrap().is_balanced());
    }

    #[test]
    fn monotone_along_t13_path() {
        let t = t13();
        let p1 = Placement::from_names(&t, ["l1", "l2", "a2"]).unwrap();
        assert_eq!(monotonicity_check(&t, &p1).unwrap(), None);
        let got: Vec<usize> = ["root", "A", "A1", "l1"]
            .iter()
            .map(|n| failure_number(&t, t.id(n).unwrap(), &p1).unwrap())
            .collect();
        assert_eq!(got, [3, 3, 2, 1]);
    }

    #[test]
    fn path_aggregates() {
        let t = t13();
        let p2 = Placement::from_names(&t, ["a2", "b1", "b2"]).unwrap();
        let b1 = t.id("b1").unwrap();
        let path = path_aggregate(&t, t.root(), b1, &p2).unwrap();
        assert_eq!(path.to_string(), "<1,1,1,0>");
        assert_eq!(path.total(), 3);

        let self_path = path_aggregate(&t, b1, b1, &p2).unwrap();
        assert_eq!(self_path.get(1), 1);
        assert_eq!(self_path.total(), 1);

        let empty = path_aggregate(&t, t.root(), b1, &Placement::empty()).unwrap();
        assert_eq!(empty.to_string(), "<3>");

        let err = path_aggregate(&t, b1, t.root(), &p2).unwrap_err();
        assert!(matches!(err, Error::NotDescendant { .. }));
    }

    #[test]
    fn psu_scenarios_on_rack_graph() {
        // switch -> {rack1, rack2, rack3}; each rack -> psu; psu -> two servers.
        // The aggregation switch also feeds rack1's PSU directly.
        let mut names: Vec<String> = ["switch", "rack1", "rack2", "rack3", "psu1", "psu2", "psu3"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        for r in 1..=3 {
            for s in 1..=3 {
                names.push(format!("s{r}{s}"));
            }
        }
        let mut edges = vec![(0, 1), (0, 2), (0, 3), (1, 4), (2, 5), (3, 6), (0, 4)];
        let mut candidates = Vec::new();
        for r in 0..3 {
            for s in 0..3 {
                let id = 7 + r * 3 + s;
                edges.push((4 + r, id));
                candidates.push(id);
            }
        }
        let g = FailureDag::new(names, &edges, &candidates).unwrap();
        let id = |n: &str| g.id(n).unwrap();
        let psu = id("psu1");

        let scenario_one = Placement::from_ids([id("s11"), id("s12"), id("s13")]).unwrap();
        assert_eq!(g.failure_number(psu, &scenario_one).unwrap(), 3);

        let scenario_two = Placement::from_ids([id("s11"), id("s21"), id("s31")]).unwrap();
        assert_eq!(g.failure_number(psu, &scenario_two).unwrap(), 1);

        let agg = g.failure_aggregate(&scenario_two).unwrap();
        assert_eq!(agg.total(), g.vertex_count() as u64);
        assert_eq!(agg.get(3), 1);

        let not_candidate = Placement::from_ids([psu]).unwrap();
        assert!(matches!(
            g.failure_aggregate(&not_candidate),
            Err(Error::NotALeaf(_))
        ));
    }

    #[test]
    fn dag_tolerates_event_cycles() {
        let names = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let g = FailureDag::new(names, &[(0, 1), (1, 0), (1, 2)], &[2]).unwrap();
        let p = Placement::from_ids([NodeId::new(2)]).unwrap();
        assert_eq!(g.failure_aggregate(&p).unwrap().to_string(), "<3,0>");
    }
}
