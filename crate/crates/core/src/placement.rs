use crate::error::{Error, Result};
use crate::model::{FailureTree, NodeId};

/// A set of distinct candidate nodes, stored sorted by index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Placement {
    leaves: Vec<NodeId>,
}

impl Placement {
    pub fn empty() -> Self {
        Placement::default()
    }

    /// Builds a placement on `tree`, checking that every member is a distinct leaf.
    pub fn new(tree: &FailureTree, ids: impl IntoIterator<Item = NodeId>) -> Result<Self> {
        let mut leaves: Vec<NodeId> = ids.into_iter().collect();
        for &id in &leaves {
            if id.index() >= tree.node_count() {
                return Err(Error::UnknownNode(id.to_string()));
            }
            if !tree.is_leaf(id) {
                return Err(Error::NotALeaf(tree.name(id).to_string()));
            }
        }
        leaves.sort_unstable();
        if let Some(w) = leaves.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateLeaf(tree.name(w[0]).to_string()));
        }
        Ok(Placement { leaves })
    }

    pub fn from_names<S: AsRef<str>>(
        tree: &FailureTree,
        names: impl IntoIterator<Item = S>,
    ) -> Result<Self> {
        let ids = names
            .into_iter()
            .map(|n| tree.require(n.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        Placement::new(tree, ids)
    }

    /// Placement over arbitrary vertex ids (general graphs); only distinctness is checked.
    pub fn from_ids(ids: impl IntoIterator<Item = NodeId>) -> Result<Self> {
        let mut leaves: Vec<NodeId> = ids.into_iter().collect();
        leaves.sort_unstable();
        if let Some(w) = leaves.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateLeaf(w[0].to_string()));
        }
        Ok(Placement { leaves })
    }

    pub(crate) fn from_sorted_unchecked(leaves: Vec<NodeId>) -> Self {
        debug_assert!(leaves.windows(2).all(|w| w[0] < w[1]));
        Placement { leaves }
    }

    pub fn rho(&self) -> usize {
        self.leaves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.leaves.is_empty()
    }

    pub fn leaves(&self) -> &[NodeId] {
        &self.leaves
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.leaves.binary_search(&id).is_ok()
    }

    /// Returns a copy with `id` added.
    pub fn with(&self, id: NodeId) -> Self {
        let mut leaves = self.leaves.clone();
        if let Err(pos) = leaves.binary_search(&id) {
            leaves.insert(pos, id);
        }
        Placement { leaves }
    }

    /// Member names sorted lexicographically.
    pub fn sorted_names(&self, tree: &FailureTree) -> Vec<String> {
        let mut names: Vec<String> = self
            .leaves
            .iter()
            .map(|&l| tree.name(l).to_string())
            .collect();
        names.sort();
        names
    }

    /// Checks membership against `tree` (used for placements built without validation).
    pub fn validate(&self, tree: &FailureTree) -> Result<()> {
        Placement::new(tree, self.leaves.iter().copied()).map(|_| ())
    }
}
