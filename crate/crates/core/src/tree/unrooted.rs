use std::collections::{BTreeSet, VecDeque};

use crate::error::{Error, Result};

use super::{Forest, Label, NodeId, RootedTree, Shape};

/// Unrooted leaf-labelled tree stored as adjacency lists. Unlabelled
/// degree-2 vertices are suppressed on construction.
#[derive(Clone, Debug, PartialEq)]
pub struct UnrootedTree {
    adj: Vec<Vec<NodeId>>,
    label: Vec<Option<Label>>,
}

impl UnrootedTree {
    /// Builds a tree from vertex labels and an edge list, then suppresses
    /// unlabelled degree-2 vertices and drops isolated unlabelled vertices.
    pub fn from_edges(label: Vec<Option<Label>>, edges: &[(NodeId, NodeId)]) -> Result<Self> {
        let mut adj = vec![Vec::new(); label.len()];
        for &(a, b) in edges {
            if a.index() >= label.len() || b.index() >= label.len() {
                return Err(Error::UnknownNode(if a.index() >= label.len() { a } else { b }));
            }
            adj[a.index()].push(b);
            adj[b.index()].push(a);
        }
        let t = UnrootedTree { adj, label };
        let connected = t.is_empty() || !t.bfs_distances(NodeId(0)).contains(&u32::MAX);
        if !connected || (!t.is_empty() && edges.len() + 1 != t.len()) {
            return Err(Error::InvalidTree("edge list is not a tree".into()));
        }
        Ok(t.normalized())
    }

    /// Unrooted version of a rooted tree; the root and all other out-degree-1
    /// vertices disappear.
    pub fn from_rooted(t: &RootedTree) -> Self {
        let order = t.preorder_all();
        let mut index = vec![usize::MAX; t.len()];
        for (i, v) in order.iter().enumerate() {
            index[v.index()] = i;
        }
        let label = order.iter().map(|&v| if t.is_leaf(v) { t.label(v) } else { None }).collect();
        let mut adj = vec![Vec::new(); order.len()];
        for &v in &order {
            if let Some(p) = t.parent(v) {
                let (a, b) = (index[p.index()], index[v.index()]);
                adj[a].push(NodeId::from(b));
                adj[b].push(NodeId::from(a));
            }
        }
        UnrootedTree { adj, label }.normalized()
    }

    pub fn from_newick(text: &str) -> Result<Self> {
        Ok(Self::from_rooted(&RootedTree::from_newick(text)?))
    }

    fn normalized(mut self) -> Self {
        let n = self.len();
        let mut alive = vec![true; n];
        for v in 0..n {
            if self.label[v].is_none() && self.adj[v].len() == 2 {
                let (a, b) = (self.adj[v][0], self.adj[v][1]);
                let me = NodeId::from(v);
                for (x, y) in [(a, b), (b, a)] {
                    for slot in self.adj[x.index()].iter_mut() {
                        if *slot == me {
                            *slot = y;
                        }
                    }
                }
                self.adj[v].clear();
                alive[v] = false;
            } else if self.label[v].is_none() && self.adj[v].is_empty() && n > 1 {
                alive[v] = false;
            }
        }
        let mut new_of = vec![NodeId(u32::MAX); n];
        let mut next = 0usize;
        for v in 0..n {
            if alive[v] {
                new_of[v] = NodeId::from(next);
                next += 1;
            }
        }
        let mut adj = Vec::with_capacity(next);
        let mut label = Vec::with_capacity(next);
        for v in 0..n {
            if alive[v] {
                adj.push(self.adj[v].iter().map(|w| new_of[w.index()]).collect());
                label.push(self.label[v]);
            }
        }
        UnrootedTree { adj, label }
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        (0..self.len()).map(NodeId::from)
    }

    #[inline]
    pub fn neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.adj[v.index()]
    }

    #[inline]
    pub fn degree(&self, v: NodeId) -> usize {
        self.adj[v.index()].len()
    }

    #[inline]
    pub fn label(&self, v: NodeId) -> Option<Label> {
        self.label[v.index()]
    }

    pub fn is_leaf(&self, v: NodeId) -> bool {
        self.degree(v) <= 1
    }

    /// Sorted leaf labels.
    pub fn labels(&self) -> Vec<Label> {
        let mut out: Vec<Label> = self.nodes().filter_map(|v| self.label(v)).collect();
        out.sort_unstable();
        out
    }

    pub fn leaf(&self, label: Label) -> Result<NodeId> {
        self.nodes()
            .find(|&v| self.label(v) == Some(label))
            .ok_or(Error::UnknownLabel(label))
    }

    /// Edge counts from `from` to every vertex.
    pub fn bfs_distances(&self, from: NodeId) -> Vec<u32> {
        let mut dist = vec![u32::MAX; self.len()];
        dist[from.index()] = 0;
        let mut queue = VecDeque::from([from]);
        while let Some(v) = queue.pop_front() {
            for &w in self.neighbors(v) {
                if dist[w.index()] == u32::MAX {
                    dist[w.index()] = dist[v.index()] + 1;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    pub fn distance(&self, u: NodeId, v: NodeId) -> Result<u32> {
        if u.index() >= self.len() {
            return Err(Error::UnknownNode(u));
        }
        if v.index() >= self.len() {
            return Err(Error::UnknownNode(v));
        }
        Ok(self.bfs_distances(u)[v.index()])
    }

    pub fn leaf_distance(&self, a: Label, b: Label) -> Result<u32> {
        self.distance(self.leaf(a)?, self.leaf(b)?)
    }

    /// The component of `c` after deleting edge `p`-`c`, rooted at `c`
    /// (the whole tree if `p` is `None`), with `new index -> old vertex`.
    pub fn rooted_subtree(&self, p: Option<NodeId>, c: NodeId) -> (RootedTree, Vec<NodeId>) {
        let mut f = Forest::new();
        let mut back = vec![c];
        let root = f.add_node(self.label(c));
        let mut stack = vec![(p, c, root)];
        while let Some((from, v, nv)) = stack.pop() {
            let mut kids = Vec::new();
            for &w in self.neighbors(v) {
                if Some(w) != from {
                    let nw = f.add_child(nv, self.label(w));
                    back.push(w);
                    kids.push((Some(v), w, nw));
                }
            }
            stack.extend(kids.into_iter().rev());
        }
        let (t, map) = RootedTree::from_forest(f, root).renumbered_preorder();
        let back = map.into_iter().map(|i| back[i.index()]).collect();
        (t, back)
    }

    pub fn rooted_at(&self, v: NodeId) -> RootedTree {
        self.rooted_subtree(None, v).0
    }

    /// Canonical form: rooted at the smallest-labelled leaf.
    pub fn shape(&self) -> Shape<Option<Label>> {
        let start = self
            .nodes()
            .filter(|&v| self.label(v).is_some())
            .min_by_key(|&v| self.label(v))
            .unwrap_or(NodeId(0));
        self.rooted_at(start).shape()
    }

    /// Equality as unrooted leaf-labelled topologies.
    pub fn same_topology(&self, other: &UnrootedTree) -> bool {
        self.shape() == other.shape()
    }

    /// Nontrivial splits, each given by its side not containing the smallest
    /// label.
    pub fn splits(&self) -> BTreeSet<Vec<Label>> {
        let labels = self.labels();
        let mut out = BTreeSet::new();
        for v in self.nodes() {
            for &w in self.neighbors(v) {
                let (t, _) = self.rooted_subtree(Some(v), w);
                let side = t.labels();
                if side.len() >= 2 && side.len() + 2 <= labels.len() && !side.contains(&labels[0]) {
                    out.insert(side);
                }
            }
        }
        out
    }

    /// Newick rooted at the internal vertex next to the smallest leaf.
    pub fn to_newick(&self) -> String {
        let labels = self.labels();
        match labels[..] {
            [] => return ";".into(),
            [a] => return format!("{a};"),
            [a, b] if self.len() == 2 => return format!("({a},{b});"),
            _ => {}
        }
        let leaf = self.leaf(labels[0]).expect("labelled leaf");
        self.rooted_at(self.neighbors(leaf)[0]).to_newick()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quartet_distances() {
        let q = UnrootedTree::from_newick("((1,2),(3,4));").unwrap();
        assert_eq!(q.len(), 6);
        assert_eq!(q.leaf_distance(1, 2).unwrap(), 2);
        assert_eq!(q.leaf_distance(1, 3).unwrap(), 3);
        let star = UnrootedTree::from_newick("(1,2,3,4);").unwrap();
        for a in 1..=4 {
            for b in (a + 1)..=4 {
                assert_eq!(star.leaf_distance(a, b).unwrap(), 2);
            }
        }
    }

    #[test]
    fn rooting_does_not_matter() {
        let a = UnrootedTree::from_newick("((1,2),(3,4));").unwrap();
        let b = UnrootedTree::from_newick("(1,(2,(3,4)));").unwrap();
        let c = UnrootedTree::from_newick("((1,3),(2,4));").unwrap();
        assert!(a.same_topology(&b));
        assert!(!a.same_topology(&c));
        assert_eq!(a.to_newick(), "(1,2,(3,4));");
        assert_eq!(a.splits().into_iter().collect::<Vec<_>>(), vec![vec![3, 4]]);
    }

    #[test]
    fn from_edges_suppresses_and_checks() {
        let label = vec![Some(1), None, None, Some(2), Some(3)];
        let e = |a: u32, b: u32| (NodeId(a), NodeId(b));
        let t = UnrootedTree::from_edges(label.clone(), &[e(0, 1), e(1, 2), e(2, 3), e(2, 4)]).unwrap();
        assert_eq!(t.len(), 4);
        assert_eq!(t.leaf_distance(1, 2).unwrap(), 2);
        assert!(UnrootedTree::from_edges(label, &[e(0, 1), e(2, 3)]).is_err());
    }

    #[test]
    fn two_leaf_newick() {
        let t = UnrootedTree::from_newick("(1,2);").unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.to_newick(), "(1,2);");
    }
}
