//! Arena-backed rooted and unrooted leaf-labelled trees.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

mod shape;
pub(crate) mod species;
mod unrooted;
mod weighted;

pub use shape::Shape;
pub use species::{random_phylogeny, BoundedRates, SpeciesPhylogeny, Violation};
pub use unrooted::UnrootedTree;
pub use weighted::WeightedTree;

/// Leaf labels are the integers `1..=n`.
pub type Label = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for NodeId {
    fn from(i: usize) -> Self {
        NodeId(i as u32)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// A collection of rooted trees sharing one node arena.
///
/// The reconstruction algorithms grow a forest by joining roots; a
/// [`RootedTree`] is a forest with a distinguished root.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Forest {
    parent: Vec<Option<NodeId>>,
    children: Vec<Vec<NodeId>>,
    label: Vec<Option<Label>>,
}

impl Forest {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.len()).map(NodeId::from)
    }

    pub fn add_node(&mut self, label: Option<Label>) -> NodeId {
        let id = NodeId::from(self.len());
        self.parent.push(None);
        self.children.push(Vec::new());
        self.label.push(label);
        id
    }

    pub fn add_child(&mut self, parent: NodeId, label: Option<Label>) -> NodeId {
        let id = self.add_node(label);
        self.attach(parent, id);
        id
    }

    /// Makes `child` (currently parentless) the last child of `parent`.
    pub fn attach(&mut self, parent: NodeId, child: NodeId) {
        debug_assert!(self.parent[child.index()].is_none());
        self.parent[child.index()] = Some(parent);
        self.children[parent.index()].push(child);
    }

    /// Removes the edge above `child`.
    pub fn detach(&mut self, child: NodeId) {
        if let Some(p) = self.parent[child.index()].take() {
            self.children[p.index()].retain(|&c| c != child);
        }
    }

    /// Creates a new parentless node with `a` and `b` as children.
    pub fn join(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.add_node(None);
        self.attach(v, a);
        self.attach(v, b);
        v
    }

    #[inline]
    pub fn parent(&self, v: NodeId) -> Option<NodeId> {
        self.parent[v.index()]
    }

    #[inline]
    pub fn children(&self, v: NodeId) -> &[NodeId] {
        &self.children[v.index()]
    }

    #[inline]
    pub fn label(&self, v: NodeId) -> Option<Label> {
        self.label[v.index()]
    }

    pub fn set_label(&mut self, v: NodeId, label: Option<Label>) {
        self.label[v.index()] = label;
    }

    #[inline]
    pub fn is_leaf(&self, v: NodeId) -> bool {
        self.children[v.index()].is_empty()
    }

    pub fn roots(&self) -> Vec<NodeId> {
        self.nodes().filter(|&v| self.parent(v).is_none()).collect()
    }

    /// Nodes of `v↓`, children before parents.
    pub fn postorder(&self, v: NodeId) -> Vec<NodeId> {
        let mut out = self.preorder(v);
        out.reverse();
        out
    }

    /// Nodes of `v↓`, parents before children, children in stored order.
    pub fn preorder(&self, v: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![v];
        while let Some(x) = stack.pop() {
            out.push(x);
            stack.extend(self.children(x).iter().rev().copied());
        }
        out
    }

    /// Sorted labels of the labelled leaves below `v`.
    pub fn leaf_labels(&self, v: NodeId) -> Vec<Label> {
        let mut out: Vec<Label> = self
            .preorder(v)
            .into_iter()
            .filter(|&x| self.is_leaf(x))
            .filter_map(|x| self.label(x))
            .collect();
        out.sort_unstable();
        out
    }

    /// Number of edges between `v` and the root of its tree.
    pub fn depth(&self, mut v: NodeId) -> usize {
        let mut d = 0;
        while let Some(p) = self.parent(v) {
            v = p;
            d += 1;
        }
        d
    }

    /// Copy of `v↓` as a standalone tree, renumbered in preorder.
    pub fn extract(&self, v: NodeId) -> RootedTree {
        self.extract_with_map(v).0
    }

    /// Like [`Forest::extract`], also returning `new index -> old node`.
    pub fn extract_with_map(&self, v: NodeId) -> (RootedTree, Vec<NodeId>) {
        self.extract_filtered(v, |_| true)
    }

    /// Copy of the part of `v↓` reachable through nodes accepted by `keep`.
    pub(crate) fn extract_filtered(
        &self,
        v: NodeId,
        keep: impl Fn(NodeId) -> bool,
    ) -> (RootedTree, Vec<NodeId>) {
        let mut out = Forest::new();
        let mut back = Vec::new();
        let root = out.add_node(self.label(v));
        back.push(v);
        let mut stack = vec![(v, root)];
        while let Some((old, new)) = stack.pop() {
            let mut kids = Vec::new();
            for &c in self.children(old) {
                if keep(c) {
                    let nc = out.add_child(new, self.label(c));
                    back.push(c);
                    kids.push((c, nc));
                }
            }
            stack.extend(kids.into_iter().rev());
        }
        // Renumber into preorder so extraction is deterministic.
        let tree = RootedTree { nodes: out, root };
        let (tree, map) = tree.renumbered_preorder();
        let back = map.into_iter().map(|i| back[i.index()]).collect();
        (tree, back)
    }
}

/// A rooted tree: a [`Forest`] with a distinguished root.
#[derive(Clone, Debug, PartialEq)]
pub struct RootedTree {
    nodes: Forest,
    root: NodeId,
}

impl Deref for RootedTree {
    type Target = Forest;
    fn deref(&self) -> &Forest {
        &self.nodes
    }
}

impl DerefMut for RootedTree {
    fn deref_mut(&mut self) -> &mut Forest {
        &mut self.nodes
    }
}

impl RootedTree {
    /// A tree consisting of a single root node.
    pub fn with_root(label: Option<Label>) -> Self {
        let mut nodes = Forest::new();
        let root = nodes.add_node(label);
        RootedTree { nodes, root }
    }

    pub fn from_forest(nodes: Forest, root: NodeId) -> Self {
        RootedTree { nodes, root }
    }

    /// Parses a Newick topology (lengths and annotations are ignored).
    pub fn from_newick(text: &str) -> Result<Self> {
        crate::newick::parse(text)?.topology()
    }

    #[inline]
    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn forest(&self) -> &Forest {
        &self.nodes
    }

    pub fn into_forest(self) -> Forest {
        self.nodes
    }

    pub fn preorder_all(&self) -> Vec<NodeId> {
        self.preorder(self.root)
    }

    pub fn postorder_all(&self) -> Vec<NodeId> {
        self.postorder(self.root)
    }

    /// Labelled leaves reachable from the root, sorted by label.
    pub fn labels(&self) -> Vec<Label> {
        self.leaf_labels(self.root)
    }

    /// Map from leaf label to node.
    pub fn leaf_index(&self) -> HashMap<Label, NodeId> {
        self.preorder_all()
            .into_iter()
            .filter(|&v| self.is_leaf(v))
            .filter_map(|v| self.label(v).map(|l| (l, v)))
            .collect()
    }

    pub fn leaf(&self, label: Label) -> Result<NodeId> {
        self.preorder_all()
            .into_iter()
            .find(|&v| self.is_leaf(v) && self.label(v) == Some(label))
            .ok_or(Error::UnknownLabel(label))
    }

    fn check_node(&self, v: NodeId) -> Result<()> {
        if v.index() < self.len() {
            Ok(())
        } else {
            Err(Error::UnknownNode(v))
        }
    }

    /// Returns the tree renumbered so node ids follow preorder, plus the map
    /// `new index -> old node`.
    pub fn renumbered_preorder(&self) -> (RootedTree, Vec<NodeId>) {
        let order = self.preorder_all();
        let mut new_of = vec![NodeId(u32::MAX); self.len()];
        for (i, &v) in order.iter().enumerate() {
            new_of[v.index()] = NodeId::from(i);
        }
        let mut nodes = Forest::new();
        for &v in &order {
            nodes.add_node(self.label(v));
        }
        for &v in &order {
            for &c in self.children(v) {
                nodes.attach(new_of[v.index()], new_of[c.index()]);
            }
        }
        (RootedTree { nodes, root: NodeId(0) }, order)
    }

    /// Children of every node reordered by smallest descendant leaf label,
    /// then renumbered in preorder. Returns `new index -> old node`.
    pub fn canonicalized(&self) -> (RootedTree, Vec<NodeId>) {
        let mut min_key: Vec<(u8, Label)> = vec![(1, Label::MAX); self.len()];
        for v in self.postorder_all() {
            let own = match (self.is_leaf(v), self.label(v)) {
                (true, Some(l)) => (0, l),
                _ => (1, Label::MAX),
            };
            let best = self
                .children(v)
                .iter()
                .map(|c| min_key[c.index()])
                .fold(own, |a, b| a.min(b));
            min_key[v.index()] = best;
        }
        let mut copy = self.clone();
        for v in copy.preorder_all() {
            copy.nodes.children[v.index()].sort_by_key(|c| min_key[c.index()]);
        }
        copy.renumbered_preorder()
    }

    /// Most recent common ancestor of a nonempty node set.
    pub fn mrca(&self, nodes: &[NodeId]) -> Result<NodeId> {
        let (&first, rest) = nodes.split_first().ok_or(Error::EmptySubset)?;
        self.check_node(first)?;
        let mut acc = first;
        for &v in rest {
            self.check_node(v)?;
            acc = self.mrca2(acc, v);
        }
        Ok(acc)
    }

    fn mrca2(&self, a: NodeId, b: NodeId) -> NodeId {
        let (mut a, mut b) = (a, b);
        let (mut da, mut db) = (self.depth(a), self.depth(b));
        while da > db {
            a = self.parent(a).expect("depth accounting");
            da -= 1;
        }
        while db > da {
            b = self.parent(b).expect("depth accounting");
            db -= 1;
        }
        while a != b {
            a = self.parent(a).expect("same tree");
            b = self.parent(b).expect("same tree");
        }
        a
    }

    /// `T|L'`: the smallest connected subgraph containing the leaves labelled
    /// by `subset` and their MRCA, rooted at the MRCA. Degree-2 vertices are
    /// kept.
    pub fn restrict(&self, subset: &[Label]) -> Result<RootedTree> {
        if subset.is_empty() {
            return Err(Error::EmptySubset);
        }
        let index = self.leaf_index();
        let leaves = subset
            .iter()
            .map(|l| index.get(l).copied().ok_or(Error::UnknownLabel(*l)))
            .collect::<Result<Vec<_>>>()?;
        let top = self.mrca(&leaves)?;
        let mut keep = vec![false; self.len()];
        for &leaf in &leaves {
            let mut x = leaf;
            while !keep[x.index()] {
                keep[x.index()] = true;
                if x == top {
                    break;
                }
                x = self.parent(x).expect("leaf below mrca");
            }
        }
        keep[top.index()] = true;
        Ok(self.extract_filtered(top, |v| keep[v.index()]).0)
    }

    /// Number of edges on the `u`-`v` path. With `ignore_root`, a path that
    /// runs through a root of out-degree 2 counts the two root edges as one.
    pub fn graph_distance(&self, u: NodeId, v: NodeId, ignore_root: bool) -> Result<usize> {
        self.check_node(u)?;
        self.check_node(v)?;
        let m = self.mrca2(u, v);
        let d = self.depth(u) + self.depth(v) - 2 * self.depth(m);
        let through_root = m == self.root && u != m && v != m;
        if ignore_root && through_root && self.children(self.root).len() == 2 {
            Ok(d - 1)
        } else {
            Ok(d)
        }
    }

    /// Graph distance between two leaves given by label.
    pub fn leaf_graph_distance(&self, a: Label, b: Label, ignore_root: bool) -> Result<usize> {
        self.graph_distance(self.leaf(a)?, self.leaf(b)?, ignore_root)
    }

    /// Canonical shape: non-root out-degree-1 vertices suppressed, children
    /// ordered by smallest leaf label. Unlabelled leaves are keyed `None`.
    pub fn shape(&self) -> Shape<Option<Label>> {
        self.shape_at(self.root)
    }

    pub fn shape_at(&self, v: NodeId) -> Shape<Option<Label>> {
        Shape::build(v, |x| self.children(x).to_vec(), |x| self.label(x))
    }

    /// Leaf-label respecting isomorphism after path suppression.
    pub fn leafsomorphic(&self, other: &RootedTree) -> bool {
        self.shape() == other.shape()
    }

    /// The rooted tree with every non-root out-degree-1 vertex suppressed.
    pub fn suppress_unary(&self) -> RootedTree {
        let mut out = Forest::new();
        let root = out.add_node(self.label(self.root));
        let mut stack = vec![(self.root, root)];
        while let Some((old, new)) = stack.pop() {
            for &c in self.children(old) {
                let mut c = c;
                while self.children(c).len() == 1 {
                    c = self.children(c)[0];
                }
                let nc = out.add_child(new, self.label(c));
                stack.push((c, nc));
            }
        }
        RootedTree { nodes: out, root }.renumbered_preorder().0
    }

    /// Whether every internal vertex has exactly two children.
    pub fn is_binary(&self) -> bool {
        self.preorder_all()
            .into_iter()
            .all(|v| self.is_leaf(v) || self.children(v).len() == 2)
    }

    pub fn to_unrooted(&self) -> UnrootedTree {
        UnrootedTree::from_rooted(self)
    }

    pub fn to_newick(&self) -> String {
        format!("{};", self.shape())
    }
}

impl fmt::Display for RootedTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_newick())
    }
}
