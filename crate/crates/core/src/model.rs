//! Failure-model trees: ingestion, validation, preprocessing and random generation.
//!
//! A [`FailureTree`] is immutable once built. Every per-node statistic the
//! solvers need (leaf counts, subtree sizes, shallowest-leaf depths, pre-order
//! layout) is computed once by [`preprocess`] in linear time.

use std::collections::{HashMap, HashSet};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::error::{Error, Result};

/// Dense node index. Indices are assigned in first-appearance order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(u32);

impl NodeId {
    pub fn new(index: usize) -> Self {
        NodeId(u32::try_from(index).expect("node index exceeds u32"))
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Topology-file errors. Line numbers are 1-based.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("topology is empty")]
    Empty,
    #[error("line {line}: expected `<parent> <child>`, got `{text}`")]
    Malformed { line: usize, text: String },
    #[error("line {line}: duplicate edge `{parent} {child}`")]
    DuplicateEdge {
        line: usize,
        parent: String,
        child: String,
    },
    #[error("line {line}: node `{node}` already has a parent")]
    MultipleParents { line: usize, node: String },
    #[error("line {line}: edge `{parent} {child}` closes a cycle")]
    Cycle {
        line: usize,
        parent: String,
        child: String,
    },
    #[error("line {line}: `{node}` is a second root")]
    MultipleRoots { line: usize, node: String },
    #[error("line {line}: node `{node}` is not connected to the tree")]
    Orphan { line: usize, node: String },
}

impl ParseError {
    pub fn line(&self) -> Option<usize> {
        match self {
            ParseError::Empty => None,
            ParseError::Malformed { line, .. }
            | ParseError::DuplicateEdge { line, .. }
            | ParseError::MultipleParents { line, .. }
            | ParseError::Cycle { line, .. }
            | ParseError::MultipleRoots { line, .. }
            | ParseError::Orphan { line, .. } => Some(*line),
        }
    }
}

/// Unvalidated tree structure: node names plus `(parent, child)` edges in input order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawTree {
    names: Vec<String>,
    edges: Vec<(usize, usize)>,
}

impl RawTree {
    pub fn new(names: Vec<String>, edges: Vec<(usize, usize)>) -> Self {
        RawTree { names, edges }
    }

    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }
}

/// Rooted failure tree. Leaves are the placement candidates; every node is a failure event.
#[derive(Debug, Clone)]
pub struct FailureTree {
    names: Vec<String>,
    index: HashMap<String, NodeId>,
    root: NodeId,
    parent: Vec<Option<NodeId>>,
    child_offsets: Vec<u32>,
    child_list: Vec<NodeId>,
    leaf_count: Vec<u32>,
    subtree_size: Vec<u32>,
    min_leaf_depth: Vec<u32>,
    shallowest_leaf: Vec<NodeId>,
    depth: Vec<u32>,
    preorder: Vec<NodeId>,
    preorder_pos: Vec<u32>,
    leaves: Vec<NodeId>,
}

impl FailureTree {
    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.node_count()).map(NodeId::new)
    }

    pub fn name(&self, u: NodeId) -> &str {
        &self.names[u.index()]
    }

    pub fn id(&self, name: &str) -> Option<NodeId> {
        self.index.get(name).copied()
    }

    /// Looks a name up, failing with [`Error::UnknownNode`].
    pub fn require(&self, name: &str) -> Result<NodeId> {
        self.id(name)
            .ok_or_else(|| Error::UnknownNode(name.to_string()))
    }

    pub fn parent(&self, u: NodeId) -> Option<NodeId> {
        self.parent[u.index()]
    }

    pub fn children(&self, u: NodeId) -> &[NodeId] {
        let lo = self.child_offsets[u.index()] as usize;
        let hi = self.child_offsets[u.index() + 1] as usize;
        &self.child_list[lo..hi]
    }

    pub fn is_leaf(&self, u: NodeId) -> bool {
        self.children(u).is_empty()
    }

    /// Number of leaf descendants (a leaf counts itself).
    pub fn leaf_count(&self, u: NodeId) -> usize {
        self.leaf_count[u.index()] as usize
    }

    pub fn subtree_size(&self, u: NodeId) -> usize {
        self.subtree_size[u.index()] as usize
    }

    /// Edges from `u` down to its shallowest descendant leaf.
    pub fn min_leaf_depth(&self, u: NodeId) -> usize {
        self.min_leaf_depth[u.index()] as usize
    }

    /// A shallowest descendant leaf of `u`; ties go to the smallest index.
    pub fn shallowest_leaf(&self, u: NodeId) -> NodeId {
        self.shallowest_leaf[u.index()]
    }

    pub fn depth(&self, u: NodeId) -> usize {
        self.depth[u.index()] as usize
    }

    /// All leaves in ascending index order.
    pub fn leaves(&self) -> &[NodeId] {
        &self.leaves
    }

    pub fn total_leaves(&self) -> usize {
        self.leaves.len()
    }

    pub fn preorder(&self) -> &[NodeId] {
        &self.preorder
    }

    /// Nodes of `u`'s subtree as a contiguous pre-order slice, `u` first.
    pub fn subtree(&self, u: NodeId) -> &[NodeId] {
        let start = self.preorder_pos[u.index()] as usize;
        &self.preorder[start..start + self.subtree_size(u)]
    }

    /// True when `b` lies in the subtree of `a` (including `a == b`).
    pub fn is_ancestor_or_self(&self, a: NodeId, b: NodeId) -> bool {
        let pa = self.preorder_pos[a.index()] as usize;
        let pb = self.preorder_pos[b.index()] as usize;
        pb >= pa && pb < pa + self.subtree_size(a)
    }

    /// Leaves of `u`'s subtree in pre-order.
    pub fn subtree_leaves(&self, u: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.subtree(u).iter().copied().filter(|&v| self.is_leaf(v))
    }

    /// Serializes as an edge list in pre-order. A single-node tree is written as its bare name.
    pub fn to_topology(&self) -> String {
        let mut out = String::new();
        if self.node_count() == 1 {
            out.push_str(self.name(self.root));
            out.push('\n');
            return out;
        }
        for &v in &self.preorder[1..] {
            let p = self.parent(v).expect("non-root has a parent");
            out.push_str(self.name(p));
            out.push(' ');
            out.push_str(self.name(v));
            out.push('\n');
        }
        out
    }

    /// Recovers the unvalidated structure (names and edges in child order).
    pub fn to_raw(&self) -> RawTree {
        let mut edges = Vec::with_capacity(self.node_count().saturating_sub(1));
        for u in self.nodes() {
            for &c in self.children(u) {
                edges.push((u.index(), c.index()));
            }
        }
        RawTree::new(self.names.clone(), edges)
    }
}

/// Validates a raw structure and computes every per-node statistic in O(n).
pub fn preprocess(raw: RawTree) -> Result<FailureTree> {
    let RawTree { names, edges } = raw;
    let n = names.len();
    if n == 0 {
        return Err(Error::InvalidTree("tree has no nodes".into()));
    }
    if n > u32::MAX as usize {
        return Err(Error::InvalidTree("too many nodes".into()));
    }

    let mut index = HashMap::with_capacity(n);
    for (i, name) in names.iter().enumerate() {
        if index.insert(name.clone(), NodeId::new(i)).is_some() {
            return Err(Error::InvalidTree(format!("duplicate node name `{name}`")));
        }
    }

    let mut parent: Vec<Option<NodeId>> = vec![None; n];
    let mut out_degree = vec![0u32; n];
    for &(p, c) in &edges {
        if p >= n || c >= n {
            return Err(Error::InvalidTree(format!("edge ({p}, {c}) out of range")));
        }
        if parent[c].is_some() {
            return Err(Error::InvalidTree(format!(
                "`{}` has two parents",
                names[c]
            )));
        }
        parent[c] = Some(NodeId::new(p));
        out_degree[p] += 1;
    }

    let mut roots = (0..n).filter(|&i| parent[i].is_none());
    let root = match (roots.next(), roots.next()) {
        (Some(r), None) => NodeId::new(r),
        (None, _) => return Err(Error::InvalidTree("no root (cycle)".into())),
        (Some(_), Some(r2)) => {
            return Err(Error::InvalidTree(format!("second root `{}`", names[r2])))
        }
    };

    // CSR children, stable in edge order.
    let mut child_offsets = vec![0u32; n + 1];
    for i in 0..n {
        child_offsets[i + 1] = child_offsets[i] + out_degree[i];
    }
    let mut fill = child_offsets.clone();
    let mut child_list = vec![NodeId(0); edges.len()];
    for &(p, c) in &edges {
        child_list[fill[p] as usize] = NodeId::new(c);
        fill[p] += 1;
    }
    let children = |u: usize| -> &[NodeId] {
        &child_list[child_offsets[u] as usize..child_offsets[u + 1] as usize]
    };

    let mut preorder = Vec::with_capacity(n);
    let mut depth = vec![0u32; n];
    let mut stack = vec![root];
    while let Some(u) = stack.pop() {
        preorder.push(u);
        for &c in children(u.index()).iter().rev() {
            depth[c.index()] = depth[u.index()] + 1;
            stack.push(c);
        }
    }
    if preorder.len() != n {
        return Err(Error::InvalidTree("structure contains a cycle".into()));
    }
    let mut preorder_pos = vec![0u32; n];
    for (pos, &u) in preorder.iter().enumerate() {
        preorder_pos[u.index()] = pos as u32;
    }

    let mut leaf_count = vec![0u32; n];
    let mut subtree_size = vec![1u32; n];
    let mut min_leaf_depth = vec![0u32; n];
    let mut shallowest_leaf: Vec<NodeId> = (0..n).map(NodeId::new).collect();
    for &u in preorder.iter().rev() {
        let ui = u.index();
        let kids = children(ui);
        if kids.is_empty() {
            leaf_count[ui] = 1;
            continue;
        }
        let mut best = (u32::MAX, NodeId(u32::MAX));
        for &c in kids {
            let ci = c.index();
            leaf_count[ui] += leaf_count[ci];
            subtree_size[ui] += subtree_size[ci];
            let cand = (min_leaf_depth[ci], shallowest_leaf[ci]);
            if cand < best {
                best = cand;
            }
        }
        min_leaf_depth[ui] = best.0 + 1;
        shallowest_leaf[ui] = best.1;
    }

    let leaves = (0..n)
        .filter(|&i| out_degree[i] == 0)
        .map(NodeId::new)
        .collect();

    Ok(FailureTree {
        names,
        index,
        root,
        parent,
        child_offsets,
        child_list,
        leaf_count,
        subtree_size,
        min_leaf_depth,
        shallowest_leaf,
        depth,
        preorder,
        preorder_pos,
        leaves,
    })
}

struct DisjointSets {
    parent: Vec<usize>,
}

impl DisjointSets {
    fn grow(&mut self) {
        let n = self.parent.len();
        self.parent.push(n);
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        self.parent[ra] = rb;
    }
}

/// Parses the whitespace-separated edge-list topology format.
///
/// Each non-blank, non-`#` line is `<parent> <child>`. A line holding a single
/// token declares a node, which is how a one-node tree is written.
pub fn parse_topology(text: &str) -> Result<FailureTree> {
    let mut names: Vec<String> = Vec::new();
    let mut first_line: Vec<usize> = Vec::new();
    let mut ids: HashMap<&str, usize> = HashMap::new();
    let mut parent_of: Vec<Option<usize>> = Vec::new();
    let mut touched: Vec<bool> = Vec::new();
    let mut seen_edges: HashSet<(usize, usize)> = HashSet::new();
    let mut edges = Vec::new();
    let mut sets = DisjointSets { parent: Vec::new() };

    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        let mut intern = |tok| -> usize {
            *ids.entry(tok).or_insert_with(|| {
                names.push(tok.to_string());
                first_line.push(lineno);
                parent_of.push(None);
                touched.push(false);
                sets.grow();
                names.len() - 1
            })
        };
        match tokens[..] {
            [single] => {
                intern(single);
            }
            [p_tok, c_tok] => {
                let p = intern(p_tok);
                let c = intern(c_tok);
                if !seen_edges.insert((p, c)) {
                    return Err(ParseError::DuplicateEdge {
                        line: lineno,
                        parent: p_tok.to_string(),
                        child: c_tok.to_string(),
                    }
                    .into());
                }
                if parent_of[c].is_some() {
                    return Err(ParseError::MultipleParents {
                        line: lineno,
                        node: c_tok.to_string(),
                    }
                    .into());
                }
                if p == c || sets.find(p) == sets.find(c) {
                    return Err(ParseError::Cycle {
                        line: lineno,
                        parent: p_tok.to_string(),
                        child: c_tok.to_string(),
                    }
                    .into());
                }
                sets.union(p, c);
                parent_of[c] = Some(p);
                touched[p] = true;
                touched[c] = true;
                edges.push((p, c));
            }
            _ => {
                return Err(ParseError::Malformed {
                    line: lineno,
                    text: trimmed.to_string(),
                }
                .into())
            }
        }
    }

    if names.is_empty() {
        return Err(ParseError::Empty.into());
    }

    // Acyclic with single parents, so each component has exactly one root.
    let roots: Vec<usize> = (0..names.len())
        .filter(|&i| parent_of[i].is_none())
        .collect();
    if roots.len() > 1 {
        // The first-appearing root is the tree; report the earliest stray one.
        let stray = roots[1..]
            .iter()
            .copied()
            .min_by_key(|&r| first_line[r])
            .expect("at least two roots");
        let line = first_line[stray];
        let node = names[stray].clone();
        return Err(if touched[stray] {
            ParseError::MultipleRoots { line, node }
        } else {
            ParseError::Orphan { line, node }
        }
        .into());
    }

    preprocess(RawTree::new(names, edges))
}

/// Deterministic random tree: node `i > 0` attaches to a uniformly chosen
/// earlier node whose arity is still below `max_children`.
pub fn generate_random_raw(nodes: usize, max_children: usize, seed: u64) -> Result<RawTree> {
    if nodes == 0 {
        return Err(Error::InvalidTree(
            "tree must have at least one node".into(),
        ));
    }
    if max_children == 0 && nodes > 1 {
        return Err(Error::ZeroArity);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut arity = vec![0usize; nodes];
    let mut open = vec![0usize];
    let mut edges = Vec::with_capacity(nodes - 1);
    for i in 1..nodes {
        let slot = rng.gen_range(0..open.len());
        let p = open[slot];
        arity[p] += 1;
        if arity[p] == max_children {
            open.swap_remove(slot);
        }
        edges.push((p, i));
        open.push(i);
    }
    let names = (0..nodes).map(|i| format!("n{i}")).collect();
    Ok(RawTree::new(names, edges))
}

pub fn generate_random_tree(nodes: usize, max_children: usize, seed: u64) -> Result<FailureTree> {
    preprocess(generate_random_raw(nodes, max_children, seed)?)
}

/// Random tree biased toward long spines whose nodes carry small side
/// subtrees, plus runs of single-child nodes. Under moderate replica counts
/// such spines become chains of nodes with exactly one unfilled child.
pub fn generate_chain_heavy_raw(nodes: usize, seed: u64) -> Result<RawTree> {
    if nodes == 0 {
        return Err(Error::InvalidTree(
            "tree must have at least one node".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::with_capacity(nodes - 1);
    let mut tip = 0usize;
    for i in 1..nodes {
        let roll: f64 = rng.gen();
        let p = if roll < 0.40 {
            // side attachment on the current spine node
            tip
        } else if roll < 0.75 {
            let p = tip;
            tip = i;
            p
        } else {
            rng.gen_range(0..i)
        };
        edges.push((p, i));
    }
    let names = (0..nodes).map(|i| format!("n{i}")).collect();
    Ok(RawTree::new(names, edges))
}

pub fn generate_chain_heavy_tree(nodes: usize, seed: u64) -> Result<FailureTree> {
    preprocess(generate_chain_heavy_raw(nodes, seed)?)
}

/// Random tree with at most `max_nodes` nodes and `max_leaves` leaves. Size
/// and arity are drawn from `seed`; draws with too many leaves are retried.
pub fn generate_small_tree(max_nodes: usize, max_leaves: usize, seed: u64) -> Result<FailureTree> {
    if max_nodes == 0 || max_leaves == 0 {
        return Err(Error::InvalidTree("bounds must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let n = rng.gen_range(1..=max_nodes);
        let k = rng.gen_range(1..=4);
        let tree = generate_random_tree(n, k, rng.gen())?;
        if tree.total_leaves() <= max_leaves {
            return Ok(tree);
        }
    }
}
