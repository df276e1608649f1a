use crate::error::{Error, Result};
use crate::num::Scalar;

use super::{Forest, Label, NodeId, RootedTree};

/// A rooted tree whose edges carry weights; `weight[v]` is the weight of the
/// edge above `v` (zero at the root).
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedTree<W> {
    pub tree: RootedTree,
    pub weight: Vec<W>,
}

impl<W: Scalar> WeightedTree<W> {
    pub fn new(tree: RootedTree, weight: Vec<W>) -> Result<Self> {
        if weight.len() != tree.len() {
            return Err(Error::InvalidTree(format!(
                "{} weights for {} vertices",
                weight.len(),
                tree.len()
            )));
        }
        Ok(WeightedTree { tree, weight })
    }

    pub fn from_newick(text: &str) -> Result<Self> {
        crate::newick::parse(text)?.weighted()
    }

    /// Weighted depth of every vertex below the root.
    pub fn root_distances(&self) -> Vec<W> {
        let mut d = vec![W::zero(); self.tree.len()];
        for v in self.tree.preorder_all() {
            if let Some(p) = self.tree.parent(v) {
                d[v.index()] = d[p.index()] + self.weight[v.index()];
            }
        }
        d
    }

    /// Weighted length of the `u`-`v` path.
    pub fn path_weight(&self, u: NodeId, v: NodeId) -> Result<W> {
        let d = self.root_distances();
        let m = self.tree.mrca(&[u, v])?;
        Ok(d[u.index()] + d[v.index()] - d[m.index()] - d[m.index()])
    }

    pub fn leaf_distance(&self, a: Label, b: Label) -> Result<W> {
        self.path_weight(self.tree.leaf(a)?, self.tree.leaf(b)?)
    }

    /// Dense leaf metric indexed by `label - 1`; labels must be `1..=n`.
    pub fn leaf_metric(&self) -> Result<Vec<Vec<W>>> {
        let labels = self.tree.labels();
        let n = labels.len();
        if labels.iter().enumerate().any(|(i, &l)| l as usize != i + 1) {
            return Err(Error::InvalidTree("leaf labels are not 1..n".into()));
        }
        let depth = self.root_distances();
        let index = self.tree.leaf_index();
        let mut out = vec![vec![W::zero(); n]; n];
        // One upward sweep per leaf: mark ancestors with their offset.
        let mut up = vec![None; self.tree.len()];
        for a in 1..=n as Label {
            let la = index[&a];
            let mut x = Some(la);
            while let Some(v) = x {
                up[v.index()] = Some(depth[la.index()] - depth[v.index()]);
                x = self.tree.parent(v);
            }
            for b in (a + 1)..=n as Label {
                let lb = index[&b];
                let mut y = lb;
                let mut acc = W::zero();
                loop {
                    if let Some(off) = up[y.index()] {
                        acc = acc + off;
                        break;
                    }
                    acc = acc + self.weight[y.index()];
                    y = self.tree.parent(y).expect("leaves share the root");
                }
                out[a as usize - 1][b as usize - 1] = acc;
                out[b as usize - 1][a as usize - 1] = acc;
            }
            let mut x = Some(la);
            while let Some(v) = x {
                up[v.index()] = None;
                x = self.tree.parent(v);
            }
        }
        Ok(out)
    }

    /// Keeps only edges on paths between labelled leaves, re-roots at the MRCA
    /// of those leaves and replaces every maximal unary path by one edge
    /// carrying the summed weight.
    pub fn cleaned(&self) -> WeightedTree<W> {
        let t = &self.tree;
        let mut useful = vec![false; t.len()];
        for v in t.postorder_all() {
            useful[v.index()] = if t.is_leaf(v) {
                t.label(v).is_some()
            } else {
                t.children(v).iter().any(|c| useful[c.index()])
            };
        }
        let mut top = t.root();
        loop {
            let mut live = t.children(top).iter().filter(|c| useful[c.index()]);
            match (live.next(), live.next()) {
                (Some(&c), None) => top = c,
                _ => break,
            }
        }
        let mut out = Forest::new();
        let mut weight = Vec::new();
        let root = out.add_node(t.label(top));
        weight.push(W::zero());
        let mut stack = vec![(top, root)];
        while let Some((old, new)) = stack.pop() {
            for &c in t.children(old) {
                if !useful[c.index()] {
                    continue;
                }
                let mut c = c;
                let mut w = self.weight[c.index()];
                loop {
                    let mut live = t.children(c).iter().filter(|x| useful[x.index()]);
                    match (live.next(), live.next()) {
                        (Some(&only), None) => {
                            c = only;
                            w = w + self.weight[c.index()];
                        }
                        _ => break,
                    }
                }
                let nc = out.add_child(new, t.label(c));
                weight.push(w);
                stack.push((c, nc));
            }
        }
        let raw = RootedTree::from_forest(out, root);
        let (tree, order) = raw.canonicalized();
        let weight = order.iter().map(|v| weight[v.index()]).collect();
        WeightedTree { tree, weight }
    }

    pub fn to_newick(&self) -> String {
        crate::newick::write(&self.tree, Some(&|v| self.weight[v.index()].to_string()), &|_| None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_and_cleanup() {
        let w: WeightedTree<f64> =
            WeightedTree::from_newick("(((1:1,2:2):1):0.5,(3:1,(4:1):1):2);").unwrap();
        assert_eq!(w.leaf_distance(1, 2).unwrap(), 3.0);
        assert_eq!(w.leaf_distance(1, 4).unwrap(), 6.5);
        let m = w.leaf_metric().unwrap();
        assert_eq!(m[0][3], 6.5);
        assert_eq!(m[3][0], 6.5);
        let c = w.cleaned();
        assert_eq!(c.tree.len(), 7);
        assert_eq!(c.leaf_metric().unwrap(), m);
        assert!(c.tree.is_binary());
    }

    #[test]
    fn cleanup_drops_unlabelled_and_reroots() {
        let mut f = Forest::new();
        let r = f.add_node(None);
        let a = f.add_child(r, None);
        let dead = f.add_child(r, None);
        f.add_child(dead, None);
        let l1 = f.add_child(a, Some(1));
        let l2 = f.add_child(a, Some(2));
        let tree = RootedTree::from_forest(f, r);
        let mut weight = vec![1.0f64; tree.len()];
        weight[l1.index()] = 0.25;
        weight[l2.index()] = 0.5;
        let w = WeightedTree::new(tree, weight).unwrap().cleaned();
        assert_eq!(w.tree.len(), 3);
        assert_eq!(w.leaf_distance(1, 2).unwrap(), 0.75);
        assert_eq!(w.weight[w.tree.root().index()], 0.0);
    }
}
