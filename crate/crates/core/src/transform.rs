//! Tree rewrites used by the fast solver.
//!
//! Single-child runs are skipped during the divide phase: an unfilled child is
//! visited at the bottom of its run and the skipped nodes are charged to the
//! edge. Degenerate chains (runs of visits with one unfilled child) are folded
//! into pseudonodes whose contribution is accumulated once, so the conquer
//! phase never builds per-link vectors.

use crate::aggregate::CompactAggregate;
use crate::error::{Error, Result};
use crate::model::{FailureTree, NodeId};
use crate::placement::Placement;
use crate::solver::{add_filled_into, Choice, SolveResult, Step, Visit};

/// Bottom node and skipped-node count for every single-child run.
#[derive(Debug, Clone)]
pub struct UnaryContraction {
    bottom: Vec<NodeId>,
    interior: Vec<u32>,
}

/// One contracted run: `upper` keeps an edge straight to `lower`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainRecord {
    pub upper: NodeId,
    pub lower: NodeId,
    /// Removed nodes, top to bottom.
    pub interior: Vec<NodeId>,
}

impl ChainRecord {
    pub fn len(&self) -> usize {
        self.interior.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interior.is_empty()
    }
}

pub fn contract_unary_paths(tree: &FailureTree) -> UnaryContraction {
    let n = tree.node_count();
    let mut bottom: Vec<NodeId> = (0..n).map(NodeId::new).collect();
    let mut interior = vec![0u32; n];
    for &u in tree.preorder().iter().rev() {
        if u == tree.root() {
            continue;
        }
        if let [c] = tree.children(u) {
            bottom[u.index()] = bottom[c.index()];
            interior[u.index()] = interior[c.index()] + 1;
        }
    }
    UnaryContraction { bottom, interior }
}

impl UnaryContraction {
    /// Where a descent into `c` lands, and how many single-child nodes it passes.
    pub fn skip(&self, c: NodeId) -> (NodeId, usize) {
        (self.bottom[c.index()], self.interior[c.index()] as usize)
    }

    /// Nodes that survive contraction: the root and every node without exactly one child.
    pub fn is_kept(&self, tree: &FailureTree, u: NodeId) -> bool {
        u == tree.root() || tree.children(u).len() != 1
    }

    /// Children of a kept node in the contracted tree.
    pub fn contracted_children(&self, tree: &FailureTree, u: NodeId) -> Vec<NodeId> {
        tree.children(u)
            .iter()
            .map(|&c| self.bottom[c.index()])
            .collect()
    }

    pub fn records(&self, tree: &FailureTree) -> Vec<ChainRecord> {
        let mut out = Vec::new();
        for &u in tree.preorder() {
            if !self.is_kept(tree, u) {
                continue;
            }
            for &c in tree.children(u) {
                if self.interior[c.index()] == 0 {
                    continue;
                }
                let mut interior = Vec::with_capacity(self.interior[c.index()] as usize);
                let mut v = c;
                while !self.is_kept(tree, v) {
                    interior.push(v);
                    v = tree.children(v)[0];
                }
                out.push(ChainRecord {
                    upper: u,
                    lower: v,
                    interior,
                });
            }
        }
        out
    }
}

/// A maximal run of chain-link visits and the visit that ends it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegenerateChain {
    /// Link visits from the head down.
    pub members: Vec<usize>,
    pub terminal: usize,
}

pub fn find_degenerate_chains(visits: &[Visit]) -> Vec<DegenerateChain> {
    let mut chains = Vec::new();
    for (vi, v) in visits.iter().enumerate() {
        if !v.is_chain_link() {
            continue;
        }
        if v.parent.is_some_and(|p| visits[p].is_chain_link()) {
            continue;
        }
        let mut members = Vec::new();
        let mut cur = vi;
        while visits[cur].is_chain_link() {
            members.push(cur);
            cur = match &visits[cur].step {
                Step::Split {
                    unfilled_visits, ..
                } => unfilled_visits[0],
                _ => unreachable!("chain link is a split"),
            };
        }
        chains.push(DegenerateChain {
            members,
            terminal: cur,
        });
    }
    chains
}

/// A folded chain. Its result is the contribution plus the terminal's result.
#[derive(Debug, Clone)]
pub struct Pseudonode {
    pub head_visit: usize,
    pub terminal_visit: usize,
    pub member_visits: Vec<usize>,
    /// Visited nodes of the chain, head first.
    pub original_chain: Vec<NodeId>,
    /// Filled children hanging off the chain.
    pub filled_subtrees: Vec<NodeId>,
    pub high_contribution: CompactAggregate,
    pub low_contribution: CompactAggregate,
    /// Nodes accounted for by the pseudonode itself.
    pub size: usize,
    pub r_head: usize,
}

impl Pseudonode {
    pub fn combine(&self, terminal: &SolveResult) -> SolveResult {
        let mut high = self.high_contribution.clone();
        high.add_assign(&terminal.high);
        let mut low = self.low_contribution.clone();
        low.add_assign(&terminal.low);
        SolveResult { high, low }
    }
}

/// Builds one pseudonode per chain. Returns them with the number of
/// accumulator vectors allocated.
pub fn transform_chains(
    tree: &FailureTree,
    visits: &[Visit],
    chains: &[DegenerateChain],
) -> (Vec<Pseudonode>, usize) {
    let mut allocations = 0;
    let mut out = Vec::with_capacity(chains.len());
    for chain in chains {
        let head = chain.members[0];
        let r_head = visits[head].r;
        let mut high_acc = CompactAggregate::zeros(r_head);
        let mut low_acc = CompactAggregate::zeros(r_head);
        let mut filled_acc = CompactAggregate::zeros(r_head);
        allocations += 3;
        let mut filled_subtrees = Vec::new();
        let mut size = 0;
        for &m in chain.members.iter().rev() {
            let v = &visits[m];
            let Step::Split { fill, .. } = &v.step else {
                unreachable!("chain link is a split");
            };
            for &f in &fill.filled {
                add_filled_into(tree, f, &mut filled_acc);
                size += tree.subtree_size(f);
            }
            filled_subtrees.extend_from_slice(&fill.filled);
            let own = 1 + v.edge_interior as i64;
            high_acc.bump_by(v.r, own).expect("r within head capacity");
            low_acc
                .bump_by(v.r - 1, own)
                .expect("r within head capacity");
            size += 1 + v.edge_interior;
        }
        high_acc.add_assign(&filled_acc);
        low_acc.add_assign(&filled_acc);
        out.push(Pseudonode {
            head_visit: head,
            terminal_visit: chain.terminal,
            member_visits: chain.members.clone(),
            original_chain: chain.members.iter().map(|&m| visits[m].node).collect(),
            filled_subtrees,
            high_contribution: high_acc,
            low_contribution: low_acc,
            size,
            r_head,
        });
    }
    (out, allocations)
}

/// Walks the visit plan top-down and collects the chosen leaves.
pub fn expand_solution(
    tree: &FailureTree,
    visits: &[Visit],
    choices: &[Option<Choice>],
    pseudonodes: &[Pseudonode],
) -> Result<Placement> {
    if visits.is_empty() {
        return Ok(Placement::empty());
    }
    let mut head_of: Vec<Option<usize>> = vec![None; visits.len()];
    for (p, pn) in pseudonodes.iter().enumerate() {
        head_of[pn.head_visit] = Some(p);
    }
    let mut leaves = Vec::new();
    let mut stack = vec![(0usize, true)];
    while let Some((vi, high)) = stack.pop() {
        let v = &visits[vi];
        let target = if high { v.r } else { v.r - 1 };
        if target == 0 {
            continue;
        }
        if let Some(p) = head_of[vi] {
            let pn = &pseudonodes[p];
            for &f in &pn.filled_subtrees {
                leaves.extend(tree.subtree_leaves(f));
            }
            stack.push((pn.terminal_visit, high));
            continue;
        }
        match &v.step {
            Step::Leaf => leaves.push(v.node),
            Step::Shallowest => leaves.push(tree.shallowest_leaf(v.node)),
            Step::Split {
                fill,
                unfilled_visits,
                ..
            } => {
                for &f in &fill.filled {
                    leaves.extend(tree.subtree_leaves(f));
                }
                let choice = choices[vi].as_ref().ok_or_else(|| {
                    Error::Internal(format!("no decision recorded at `{}`", tree.name(v.node)))
                })?;
                for (j, &cv) in unfilled_visits.iter().enumerate() {
                    let ceil = choice.ceil_in_low[j] || (high && j == choice.extra);
                    stack.push((cv, ceil));
                }
            }
        }
    }
    leaves.sort_unstable();
    if leaves.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Internal("reconstruction chose a leaf twice".into()));
    }
    if let Some(&bad) = leaves.iter().find(|&&l| !tree.is_leaf(l)) {
        return Err(Error::Internal(format!(
            "reconstruction chose internal node `{}`",
            tree.name(bad)
        )));
    }
    Ok(Placement::from_sorted_unchecked(leaves))
}
