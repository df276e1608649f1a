//! Species-tree reconstruction from many observed gene trees: median leaf
//! distances, truncations built by single linkage, prunings built by cherry
//! picking, and the two full pipelines.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::num::{lower_median, Scalar};
use crate::observation::Observation;
use crate::tree::{Forest, Label, NodeId, RootedTree, SpeciesPhylogeny, UnrootedTree};

mod contraction;
mod distortion;

pub use contraction::{reconstruct_from_contractions, ContractionParams, ContractionReport, JoinRecord};
pub use distortion::{reconstruct_from_distortions, DistortionParams, DistortionReport, MergeRecord};

/// Dense symmetric matrix over leaf labels `1..=n`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LeafMatrix<D> {
    n: usize,
    values: Vec<D>,
}

impl<D: Copy> LeafMatrix<D> {
    pub fn from_fn(n: usize, f: impl Fn(Label, Label) -> D) -> Self {
        let mut values = Vec::with_capacity(n * n);
        for a in 1..=n as Label {
            for b in 1..=n as Label {
                values.push(f(a, b));
            }
        }
        LeafMatrix { n, values }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, a: Label, b: Label) -> D {
        self.values[(a as usize - 1) * self.n + (b as usize - 1)]
    }
}

/// Pairwise lower medians of the observed leaf distances.
pub fn median_leaf_distances<O: Observation>(observations: &[O]) -> Result<LeafMatrix<O::Distance>> {
    let first = observations
        .first()
        .ok_or_else(|| Error::InvalidParameter("at least one observation is required".into()))?;
    let n = first.labels().len();
    let expected: Vec<Label> = (1..=n as Label).collect();
    for o in observations {
        let mut l = o.labels();
        l.sort_unstable();
        if l != expected {
            return Err(Error::InconsistentLeafSets);
        }
    }
    let mats = observations.par_iter().map(|o| o.distance_matrix(n)).collect::<Result<Vec<_>>>()?;
    let mut column = Vec::with_capacity(mats.len());
    let values = (0..n * n)
        .map(|i| {
            column.clear();
            column.extend(mats.iter().map(|m| m[i]));
            lower_median(&mut column).expect("nonempty")
        })
        .collect();
    Ok(LeafMatrix { n, values })
}

/// Smallest support at which a median is trusted.
pub fn support_threshold(genes: usize) -> usize {
    genes.min(5.max(genes.div_ceil(4)))
}

/// Disjoint rooted cluster trees, ordered by smallest label.
#[derive(Clone, Debug, PartialEq)]
pub struct Truncation {
    pub clusters: Vec<RootedTree>,
}

impl Truncation {
    pub fn leaf_sets(&self) -> Vec<Vec<Label>> {
        self.clusters.iter().map(|c| c.labels()).collect()
    }

    /// Ways in which this fails to be a `(d0, eps)`-truncation of `s`:
    /// clusters must partition the leaves, lie between the species clusters
    /// at levels `d0 - 2 eps` and `d0`, and carry the induced topology.
    pub fn violations<W: Scalar>(&self, s: &SpeciesPhylogeny<W>, d0: W, eps: W) -> Vec<String> {
        let mut out = Vec::new();
        let all = s.tree().labels();
        let n = all.len();
        let mut owner = vec![usize::MAX; n + 1];
        for (i, set) in self.leaf_sets().iter().enumerate() {
            for &l in set {
                if l as usize > n || owner[l as usize] != usize::MAX {
                    out.push(format!("leaf {l} is not in exactly one cluster"));
                } else {
                    owner[l as usize] = i;
                }
            }
        }
        if let Some(l) = (1..=n).find(|&l| owner[l] == usize::MAX) {
            out.push(format!("leaf {l} is in no cluster"));
        }
        let metric = |a: Label, b: Label| s.species_metric(a, b).expect("known labels");
        let fine = components(n, |a, b| metric(a, b) <= d0 - eps - eps);
        let coarse = components(n, |a, b| metric(a, b) <= d0);
        for a in 1..=n {
            for b in a + 1..=n {
                let same = owner[a] == owner[b];
                if fine[a] == fine[b] && !same {
                    out.push(format!("{a} and {b} are close but split"));
                }
                if same && coarse[a] != coarse[b] {
                    out.push(format!("{a} and {b} are far but joined"));
                }
            }
        }
        for c in &self.clusters {
            match s.tree().restrict(&c.labels()) {
                Ok(r) if r.leafsomorphic(c) => {}
                _ => out.push(format!("cluster {:?} is not faithful", c.labels())),
            }
        }
        out
    }
}

// Component id of each label in the graph joining close pairs.
fn components(n: usize, close: impl Fn(Label, Label) -> bool) -> Vec<usize> {
    let mut comp: Vec<usize> = (0..=n).collect();
    fn find(c: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while c[r] != r {
            r = c[r];
        }
        c[x] = r;
        r
    }
    for a in 1..=n {
        for b in a + 1..=n {
            if close(a as Label, b as Label) {
                let (ra, rb) = (find(&mut comp, a), find(&mut comp, b));
                comp[ra.max(rb)] = ra.min(rb);
            }
        }
    }
    (0..=n).map(|x| find(&mut comp, x)).collect()
}

/// Active clusters of a growing forest with their smallest labels.
#[derive(Clone, Debug)]
struct Clusters {
    forest: Forest,
    active: Vec<NodeId>,
    min_label: Vec<Label>,
}

impl Clusters {
    fn singletons(n: usize) -> Self {
        let mut forest = Forest::new();
        let active = (1..=n as Label).map(|l| forest.add_node(Some(l))).collect();
        Clusters { forest, active, min_label: (1..=n as Label).collect() }
    }

    fn key(&self, a: NodeId, b: NodeId) -> (Label, Label) {
        let (x, y) = (self.min_label[a.index()], self.min_label[b.index()]);
        (x.min(y), x.max(y))
    }

    /// Joins `a` and `b` under a new vertex that replaces them.
    fn join(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (a, b) = if self.min_label[a.index()] <= self.min_label[b.index()] { (a, b) } else { (b, a) };
        let v = self.forest.join(a, b);
        self.min_label.push(self.min_label[a.index()]);
        self.active.retain(|&x| x != a && x != b);
        self.active.push(v);
        v
    }

    fn labels(&self, v: NodeId) -> Vec<Label> {
        self.forest.leaf_labels(v)
    }

    fn trees(&self) -> Vec<RootedTree> {
        let mut roots = self.active.clone();
        roots.sort_by_key(|v| self.min_label[v.index()]);
        roots.into_iter().map(|v| self.forest.extract(v)).collect()
    }

    /// Pairs of active clusters ordered by their label keys.
    fn pairs(&self) -> Vec<(NodeId, NodeId)> {
        let mut p = Vec::new();
        for (i, &a) in self.active.iter().enumerate() {
            for &b in &self.active[i + 1..] {
                p.push(if self.min_label[a.index()] < self.min_label[b.index()] { (a, b) } else { (b, a) });
            }
        }
        p.sort_by_key(|&(a, b)| self.key(a, b));
        p
    }
}

/// Single linkage on `dhat`: merges the closest pair of clusters (closest
/// leaf pair across) while that distance is at most `d0 - epsilon`.
pub fn single_linkage_truncation<W: Scalar>(dhat: &LeafMatrix<W>, d0: W, epsilon: W) -> Truncation {
    let n = dhat.n();
    let mut c = Clusters::singletons(n);
    // Linkage between active clusters, keyed by forest vertex.
    let mut link: std::collections::HashMap<(NodeId, NodeId), W> = std::collections::HashMap::new();
    for a in 1..=n as Label {
        for b in a + 1..=n as Label {
            link.insert((NodeId(a - 1), NodeId(b - 1)), dhat.get(a, b));
        }
    }
    let get = |link: &std::collections::HashMap<(NodeId, NodeId), W>, a: NodeId, b: NodeId| {
        link.get(&(a.min(b), a.max(b))).copied().expect("linkage of active pair")
    };
    while c.active.len() > 1 {
        let mut best: Option<(W, NodeId, NodeId)> = None;
        for (a, b) in c.pairs() {
            let d = get(&link, a, b);
            if best.is_none_or(|(x, _, _)| d < x) {
                best = Some((d, a, b));
            }
        }
        let (d, a, b) = best.expect("two clusters");
        if d > d0 - epsilon {
            break;
        }
        let v = c.join(a, b);
        for &f in &c.active {
            if f != v {
                let l = get(&link, a, f).min(get(&link, b, f));
                link.insert((f.min(v), f.max(v)), l);
            }
        }
    }
    Truncation { clusters: c.trees() }
}

/// Disjoint rooted subtrees, ordered by smallest label.
#[derive(Clone, Debug, PartialEq)]
pub struct Pruning {
    pub trees: Vec<RootedTree>,
}

impl Pruning {
    pub fn edge_count(&self) -> usize {
        self.trees.iter().map(|t| t.preorder_all().len() - 1).sum()
    }

    /// Disjointness and fullness failures against the unrooted species
    /// topology: every tree must be a whole side of some species edge with
    /// the same shape.
    pub fn violations(&self, species: &UnrootedTree) -> Vec<String> {
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        for t in &self.trees {
            for l in t.labels() {
                if !seen.insert(l) {
                    out.push(format!("leaf {l} appears twice"));
                }
            }
        }
        let mut sides = Vec::new();
        for c in species.nodes() {
            for &p in species.neighbors(c) {
                let (sub, _) = species.rooted_subtree(Some(p), c);
                sides.push((sub.labels(), sub));
            }
        }
        for t in &self.trees {
            let labels = t.labels();
            if labels.len() == 1 {
                continue;
            }
            let full = sides.iter().any(|(l, sub)| *l == labels && sub.leafsomorphic(t));
            if !full {
                out.push(format!("tree {labels:?} is not a full subtree"));
            }
        }
        out
    }
}

/// Pairs at median distance two, as sorted label pairs.
fn cherries(dhat: &LeafMatrix<u32>) -> Result<Vec<(Label, Label)>> {
    let n = dhat.n() as Label;
    let mut claimed = vec![false; n as usize + 1];
    let mut out = Vec::new();
    for a in 1..=n {
        for b in a + 1..=n {
            if dhat.get(a, b) == 2 {
                for l in [a, b] {
                    if std::mem::replace(&mut claimed[l as usize], true) {
                        return Err(Error::ConflictingCherries(l));
                    }
                }
                out.push((a, b));
            }
        }
    }
    Ok(out)
}

/// Cherries read off the median graph distances plus remaining singletons.
pub fn initial_pruning(dhat: &LeafMatrix<u32>) -> Result<Pruning> {
    let pairs = cherries(dhat)?;
    let mut c = Clusters::singletons(dhat.n());
    for (a, b) in pairs {
        c.join(NodeId(a - 1), NodeId(b - 1));
    }
    Ok(Pruning { trees: c.trees() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observation::ContractedGeneTree;

    fn unrooted(s: &str) -> UnrootedTree {
        UnrootedTree::from_newick(s).unwrap()
    }

    fn graph_matrix(t: &UnrootedTree) -> LeafMatrix<u32> {
        let g = ContractedGeneTree { topology: t.clone(), gene_index: 0 };
        median_leaf_distances(&[g]).unwrap()
    }

    #[test]
    fn median_of_graph_distances() {
        let trees = ["((1,2),(3,4));", "((1,3),(2,4));", "((1,2),(3,4));", "((1,4),(2,3));", "(((1,2),3),4);"];
        let obs: Vec<ContractedGeneTree> = trees
            .iter()
            .enumerate()
            .map(|(i, s)| ContractedGeneTree { topology: unrooted(s), gene_index: i })
            .collect();
        let d = median_leaf_distances(&obs).unwrap();
        // 1-2 distances: 2, 3, 2, 3, 2.
        assert_eq!(d.get(1, 2), 2);
        assert_eq!(d.get(2, 1), 2);
        assert_eq!(d.get(3, 3), 0);
        let odd = ContractedGeneTree { topology: unrooted("((1,2),(3,5));"), gene_index: 9 };
        assert_eq!(median_leaf_distances(&[obs[0].clone(), odd]), Err(Error::InconsistentLeafSets));
    }

    #[test]
    fn thresholds() {
        assert_eq!(support_threshold(1), 1);
        assert_eq!(support_threshold(4), 4);
        assert_eq!(support_threshold(10), 5);
        assert_eq!(support_threshold(200), 50);
        assert_eq!(support_threshold(201), 51);
    }

    #[test]
    fn cherries_of_small_trees() {
        let p = initial_pruning(&graph_matrix(&unrooted("((1,2),(3,4));"))).unwrap();
        assert_eq!(p.trees.iter().map(|t| t.labels()).collect::<Vec<_>>(), vec![vec![1, 2], vec![3, 4]]);
        // Unrooted, the 4-leaf caterpillar is the same quartet.
        let p = initial_pruning(&graph_matrix(&unrooted("(((1,2),3),4);"))).unwrap();
        assert_eq!(p.edge_count(), 4);
        let s = unrooted("((((1,2),3),4),5);");
        let p = initial_pruning(&graph_matrix(&s)).unwrap();
        let sets: Vec<_> = p.trees.iter().map(|t| t.labels()).collect();
        assert_eq!(sets, vec![vec![1, 2], vec![3], vec![4, 5]]);
        assert!(p.violations(&s).is_empty());
        let star = unrooted("(1,2,3,4,5);");
        assert_eq!(initial_pruning(&graph_matrix(&star)), Err(Error::ConflictingCherries(1)));
    }

    #[test]
    fn single_linkage_on_an_ultrametric() {
        let s: SpeciesPhylogeny<f64> =
            SpeciesPhylogeny::from_newick("(((1:1,2:1):1,3:2):2,(4:3,5:3):1);").unwrap();
        let d = LeafMatrix::from_fn(5, |a, b| s.species_metric(a, b).unwrap());
        let full = single_linkage_truncation(&d, 100.0, 0.0);
        assert_eq!(full.clusters.len(), 1);
        assert!(full.clusters[0].leafsomorphic(s.tree()));
        let none = single_linkage_truncation(&d, 1.0, 0.0);
        assert_eq!(none.clusters.len(), 5);
        let mid = single_linkage_truncation(&d, 4.5, 0.1);
        assert_eq!(mid.leaf_sets(), vec![vec![1, 2, 3], vec![4], vec![5]]);
        assert!(mid.violations(&s, 4.5, 0.1).is_empty());
        let mut wrong = mid.clone();
        wrong.clusters[0] = RootedTree::from_newick("((1,3),2);").unwrap();
        assert_eq!(wrong.violations(&s, 4.5, 0.1).len(), 1);
    }

    #[test]
    fn pruning_fullness() {
        let s = unrooted("(((1,2),3),(4,(5,6)));");
        let ok = Pruning { trees: vec![RootedTree::from_newick("((1,2),3);").unwrap()] };
        assert!(ok.violations(&s).is_empty());
        let bad = Pruning { trees: vec![RootedTree::from_newick("((1,3),2);").unwrap()] };
        assert_eq!(bad.violations(&s).len(), 1);
        let partial = Pruning { trees: vec![RootedTree::from_newick("(1,3);").unwrap()] };
        assert_eq!(partial.violations(&s).len(), 1);
    }
}
