//! Imperfect views of a gene tree: ε-contractions (unrooted topologies with
//! short internal edges collapsed) and ε-distortions (rooted weighted trees
//! with a perturbed leaf metric).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hgt::GeneTree;
use crate::num::Scalar;
use crate::tree::{Label, NodeId, UnrootedTree, WeightedTree};

/// Which edges of weight at most ε get contracted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContractionPolicy {
    #[default]
    All,
    None,
    /// Each eligible edge independently with probability `p`.
    Random { p: f64, seed: u64 },
}

/// Distances a reconstruction can read off an observed gene tree.
pub trait Observation: Sync {
    type Distance: PartialOrd + Copy + Send;

    fn labels(&self) -> Vec<Label>;
    fn distance(&self, a: Label, b: Label) -> Result<Self::Distance>;

    /// Row-major distances between labels `1..=n`.
    fn distance_matrix(&self, n: usize) -> Result<Vec<Self::Distance>> {
        let mut out = Vec::with_capacity(n * n);
        for a in 1..=n as Label {
            for b in 1..=n as Label {
                out.push(self.distance(a, b)?);
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContractedGeneTree {
    pub topology: UnrootedTree,
    pub gene_index: usize,
}

impl ContractedGeneTree {
    pub fn to_newick(&self) -> String {
        self.topology.to_newick()
    }
}

impl Observation for ContractedGeneTree {
    type Distance = u32;

    fn labels(&self) -> Vec<Label> {
        self.topology.labels()
    }

    fn distance(&self, a: Label, b: Label) -> Result<u32> {
        self.topology.leaf_distance(a, b)
    }

    fn distance_matrix(&self, n: usize) -> Result<Vec<u32>> {
        let t = &self.topology;
        let leaves = (1..=n as Label).map(|l| t.leaf(l)).collect::<Result<Vec<_>>>()?;
        let mut out = Vec::with_capacity(n * n);
        for &a in &leaves {
            let d = t.bfs_distances(a);
            out.extend(leaves.iter().map(|b| d[b.index()]));
        }
        Ok(out)
    }
}

/// Endpoints and weight of an unrooted edge.
pub type WeightedEdge<W> = (NodeId, NodeId, W);

/// Unrooted weighted edge list of a cleaned tree: the two root edges of a
/// binary root are merged into one.
fn unrooted_edges<W: Scalar>(w: &WeightedTree<W>) -> (Vec<Option<Label>>, Vec<WeightedEdge<W>>) {
    let t = &w.tree;
    let root = t.root();
    let labels = t.nodes().map(|v| if t.is_leaf(v) { t.label(v) } else { None }).collect();
    let mut edges = Vec::new();
    let kids = t.children(root);
    let merged = (kids.len() == 2).then(|| (kids[0], kids[1]));
    for v in t.preorder_all() {
        let Some(p) = t.parent(v) else { continue };
        if let Some((a, b)) = merged {
            if v == a {
                edges.push((a, b, w.weight[a.index()] + w.weight[b.index()]));
                continue;
            }
            if v == b {
                continue;
            }
        }
        edges.push((p, v, w.weight[v.index()]));
    }
    (labels, edges)
}

/// Contracts the policy-selected internal edges of weight at most `epsilon`
/// and returns the resulting topology with its surviving weighted edges.
/// Pendant edges are never contracted, so the leaf set is preserved.
pub fn contract_edges<W: Scalar>(
    labels: &[Option<Label>],
    edges: &[WeightedEdge<W>],
    epsilon: W,
    policy: ContractionPolicy,
    stream: u64,
) -> Result<(UnrootedTree, Vec<WeightedEdge<W>>)> {
    let n = labels.len();
    let mut degree = vec![0usize; n];
    for &(a, b, _) in edges {
        degree[a.index()] += 1;
        degree[b.index()] += 1;
    }
    let pendant = |v: NodeId| degree[v.index()] <= 1;
    let mut rng = match policy {
        ContractionPolicy::Random { seed, .. } => {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(stream);
            Some(r)
        }
        _ => None,
    };
    let mut uf: Vec<usize> = (0..n).collect();
    fn find(uf: &mut [usize], mut x: usize) -> usize {
        while uf[x] != x {
            uf[x] = uf[uf[x]];
            x = uf[x];
        }
        x
    }
    let mut keep = Vec::new();
    for &(a, b, w) in edges {
        let eligible = !pendant(a) && !pendant(b) && w <= epsilon;
        let chosen = eligible
            && match policy {
                ContractionPolicy::All => true,
                ContractionPolicy::None => false,
                ContractionPolicy::Random { p, .. } => {
                    rng.as_mut().expect("rng for random policy").random_bool(p.clamp(0.0, 1.0))
                }
            };
        if chosen {
            let (ra, rb) = (find(&mut uf, a.index()), find(&mut uf, b.index()));
            uf[ra.max(rb)] = ra.min(rb);
        } else {
            keep.push((a, b, w));
        }
    }
    let mut comp = vec![usize::MAX; n];
    let mut next = 0;
    let mut new_labels = Vec::new();
    for v in 0..n {
        if degree[v] == 0 && labels[v].is_none() {
            continue;
        }
        let r = find(&mut uf, v);
        if comp[r] == usize::MAX {
            comp[r] = next;
            next += 1;
            new_labels.push(None);
        }
        comp[v] = comp[r];
        if labels[v].is_some() {
            new_labels[comp[v]] = labels[v];
        }
    }
    let kept: Vec<WeightedEdge<W>> = keep
        .into_iter()
        .map(|(a, b, w)| (NodeId::from(comp[a.index()]), NodeId::from(comp[b.index()]), w))
        .collect();
    let plain: Vec<(NodeId, NodeId)> = kept.iter().map(|&(a, b, _)| (a, b)).collect();
    let topology = UnrootedTree::from_edges(new_labels, &plain)?;
    Ok((topology, kept))
}

/// ε-contraction of a weighted gene tree.
pub fn contract_weighted<W: Scalar>(
    gene: &WeightedTree<W>,
    epsilon: W,
    policy: ContractionPolicy,
    gene_index: usize,
) -> Result<ContractedGeneTree> {
    if !(epsilon >= W::zero()) {
        return Err(Error::InvalidParameter("epsilon must be nonnegative".into()));
    }
    let cleaned = gene.cleaned();
    let (labels, edges) = unrooted_edges(&cleaned);
    let (topology, _) = contract_edges(&labels, &edges, epsilon, policy, gene_index as u64)?;
    Ok(ContractedGeneTree { topology, gene_index })
}

pub fn contract<W: Scalar>(
    gene: &GeneTree<W>,
    epsilon: W,
    policy: ContractionPolicy,
    gene_index: usize,
) -> Result<ContractedGeneTree> {
    contract_weighted(&gene.weighted(), epsilon, policy, gene_index)
}

/// Rooted weighted gene tree whose leaf metric is within ε of the truth.
#[derive(Clone, Debug, PartialEq)]
pub struct DistortedGeneTree<W> {
    pub tree: WeightedTree<W>,
    pub gene_index: usize,
    metric: Vec<Vec<W>>,
}

impl<W: Scalar> DistortedGeneTree<W> {
    pub fn new(tree: WeightedTree<W>, gene_index: usize) -> Result<Self> {
        let metric = tree.leaf_metric()?;
        Ok(DistortedGeneTree { tree, gene_index, metric })
    }

    /// Dense leaf metric indexed by `label - 1`.
    pub fn metric(&self) -> &[Vec<W>] {
        &self.metric
    }

    pub fn to_newick(&self) -> String {
        self.tree.to_newick()
    }
}

impl<W: Scalar> Observation for DistortedGeneTree<W> {
    type Distance = W;

    fn labels(&self) -> Vec<Label> {
        (1..=self.metric.len() as Label).collect()
    }

    fn distance(&self, a: Label, b: Label) -> Result<W> {
        let n = self.metric.len() as Label;
        for l in [a, b] {
            if l == 0 || l > n {
                return Err(Error::UnknownLabel(l));
            }
        }
        Ok(self.metric[a as usize - 1][b as usize - 1])
    }
}

/// Cleans the gene tree and applies `perturb(vertex, weight)` to every edge
/// of the cleaned tree. Fails if a resulting weight is not positive.
pub fn distort_with<W: Scalar>(
    gene: &WeightedTree<W>,
    gene_index: usize,
    mut perturb: impl FnMut(&WeightedTree<W>, NodeId) -> W,
) -> Result<DistortedGeneTree<W>> {
    let mut c = gene.cleaned();
    let root = c.tree.root();
    let new: Vec<W> = c
        .tree
        .nodes()
        .map(|v| if v == root { W::zero() } else { perturb(&c, v) })
        .collect();
    if let Some(v) = c.tree.nodes().find(|&v| v != root && !(new[v.index()] > W::zero())) {
        return Err(Error::InvalidTree(format!("perturbed weight above {v} is not positive")));
    }
    c.weight = new;
    DistortedGeneTree::new(c, gene_index)
}

/// Pendant edges get independent uniform noise in `[-ε/2, ε/2]`; a weight
/// that would become nonpositive is halved instead.
pub fn distort<W: Scalar>(
    gene: &GeneTree<W>,
    epsilon: W,
    seed: u64,
    gene_index: usize,
) -> Result<DistortedGeneTree<W>> {
    distort_weighted(&gene.weighted(), epsilon, seed, gene_index)
}

pub fn distort_weighted<W: Scalar>(
    gene: &WeightedTree<W>,
    epsilon: W,
    seed: u64,
    gene_index: usize,
) -> Result<DistortedGeneTree<W>> {
    if !(epsilon >= W::zero()) {
        return Err(Error::InvalidParameter("epsilon must be nonnegative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(gene_index as u64);
    let half = epsilon / W::of(2.0);
    distort_with(gene, gene_index, |c, v| {
        let w = c.weight[v.index()];
        if !c.tree.is_leaf(v) || half == W::zero() {
            return w;
        }
        let d = rng.random_range(-half..=half);
        if w + d > W::zero() {
            w + d
        } else {
            w / W::of(2.0)
        }
    })
}

/// Largest `|ω(a,b) - ω'(a,b)|` over leaf pairs.
pub fn metric_deviation<W: Scalar>(truth: &WeightedTree<W>, observed: &DistortedGeneTree<W>) -> Result<W> {
    let m = truth.leaf_metric()?;
    let mut worst = W::zero();
    for (i, row) in m.iter().enumerate() {
        for (j, &x) in row.iter().enumerate() {
            worst = worst.max((x - observed.metric()[i][j]).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hgt::{execute_hgt, HgtEvent, Location};
    use crate::tree::{RootedTree, SpeciesPhylogeny};

    fn balanced() -> SpeciesPhylogeny<f64> {
        SpeciesPhylogeny::from_newick("((1:1,2:1):1,(3:1,4:1):1);").unwrap()
    }

    fn quartet(s: &str) -> UnrootedTree {
        UnrootedTree::from_newick(s).unwrap()
    }

    #[test]
    fn contraction_examples() {
        let s = balanced();
        let g = execute_hgt(&s, &[], s.subst_rates()).unwrap();
        let c = contract(&g, 0.5, ContractionPolicy::All, 0).unwrap();
        assert!(c.topology.same_topology(&quartet("((1,2),(3,4));")));
        assert_eq!(c.distance(1, 2).unwrap(), 2);
        assert_eq!(c.distance(1, 3).unwrap(), 3);
        let star = contract(&g, f64::INFINITY, ContractionPolicy::All, 0).unwrap();
        assert!(star.topology.same_topology(&quartet("(1,2,3,4);")));
        for (a, b) in [(1, 2), (1, 3), (2, 4), (3, 4)] {
            assert_eq!(star.distance(a, b).unwrap(), 2);
        }
        let none = contract(&g, f64::INFINITY, ContractionPolicy::None, 0).unwrap();
        assert!(none.topology.same_topology(&quartet("((1,2),(3,4));")));
    }

    #[test]
    fn short_transfer_window_is_contracted() {
        // 3 is regrafted onto the pendant edge of 1 just 0.1 below the (1,2)
        // vertex, leaving an internal edge of weight 0.1.
        let s = balanced();
        let pendant = |l| s.tree().leaf(l).unwrap();
        let ev = HgtEvent {
            recipient: Location { edge: pendant(3), offset: 0.1 },
            donor: Location { edge: pendant(1), offset: 0.1 },
            time: 1.1,
        };
        let g = execute_hgt(&s, &[ev], s.subst_rates()).unwrap();
        let raw = contract(&g, 0.05, ContractionPolicy::All, 0).unwrap();
        assert!(raw.topology.same_topology(&quartet("((1,3),(2,4));")));
        assert_eq!(raw.distance(1, 3).unwrap(), 2);
        assert_eq!(raw.distance(1, 2).unwrap(), 3);
        let c = contract(&g, 0.2, ContractionPolicy::All, 0).unwrap();
        assert!(c.topology.same_topology(&quartet("(1,2,3,4);")));
        assert_eq!(c.distance(1, 2).unwrap(), 2);
        assert_eq!(c.distance(2, 4).unwrap(), 2);
        let kept = contract(&g, 0.2, ContractionPolicy::None, 0).unwrap();
        assert!(kept.topology.same_topology(&raw.topology));
    }

    #[test]
    fn distortion_examples() {
        let s = balanced();
        let g = execute_hgt(&s, &[], s.subst_rates()).unwrap();
        let exact = distort(&g, 0.0, 1, 0).unwrap();
        assert_eq!(exact.tree, g.cleaned());
        for seed in 0..200 {
            let d = distort(&g, 0.2, seed, 3).unwrap();
            let x = d.distance(1, 2).unwrap();
            assert!((1.8..=2.2).contains(&x));
            assert!(metric_deviation(&g.cleaned(), &d).unwrap() <= 0.2 + 1e-12);
            assert!(d.tree.tree.leafsomorphic(&g.cleaned().tree));
        }
        assert_eq!(exact.distance(1, 9), Err(Error::UnknownLabel(9)));
    }

    #[test]
    fn adversarial_hook() {
        let w = WeightedTree::<f64>::from_newick("((1:1,2:1):1,(3:1,4:1):1);").unwrap();
        let d = distort_with(&w, 0, |c, v| {
            if c.tree.label(v) == Some(1) { c.weight[v.index()] + 0.1 } else { c.weight[v.index()] }
        })
        .unwrap();
        assert_eq!(d.distance(1, 2).unwrap(), 2.1);
        assert!(distort_with(&w, 0, |_, _| 0.0).is_err());
        let t = RootedTree::from_newick("((1,2),(3,4));").unwrap();
        assert!(d.tree.tree.leafsomorphic(&t));
    }
}
