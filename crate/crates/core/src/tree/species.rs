use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Scalar;

use super::{Forest, Label, NodeId, RootedTree};

/// Rooted ultrametric binary tree with per-edge times, HGT rates and
/// substitution rates. Edge quantities are indexed by the edge's lower
/// endpoint; entries at the root are zero.
///
/// Node ids are canonical: children are ordered by smallest leaf label and
/// vertices are numbered in preorder, so ids survive a Newick round trip.
#[derive(Clone, Debug, PartialEq)]
pub struct SpeciesPhylogeny<W> {
    tree: RootedTree,
    time: Vec<W>,
    hgt_rate: Vec<W>,
    subst_rate: Vec<W>,
    depth: Vec<W>,
}

/// One violated phylogeny invariant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    RootDegree { found: usize },
    InternalDegree { node: NodeId, found: usize },
    NonPositiveTime { node: NodeId },
    NegativeHgtRate { node: NodeId },
    NonPositiveSubstRate { node: NodeId },
    NotUltrametric { node: NodeId, spread: f64 },
    UnlabelledLeaf { node: NodeId },
    DuplicateLabel { label: Label },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::RootDegree { found } => write!(f, "root has degree {found}, expected 2"),
            Violation::InternalDegree { node, found } => {
                write!(f, "internal vertex {node} has degree {found}, expected 3")
            }
            Violation::NonPositiveTime { node } => write!(f, "edge above {node} has time <= 0"),
            Violation::NegativeHgtRate { node } => write!(f, "edge above {node} has HGT rate < 0"),
            Violation::NonPositiveSubstRate { node } => {
                write!(f, "edge above {node} has substitution rate <= 0")
            }
            Violation::NotUltrametric { node, spread } => {
                write!(f, "leaf depths below {node} differ by {spread}")
            }
            Violation::UnlabelledLeaf { node } => write!(f, "leaf {node} has no label"),
            Violation::DuplicateLabel { label } => write!(f, "label {label} used twice"),
        }
    }
}

impl<W: Scalar> SpeciesPhylogeny<W> {
    /// Assembles a phylogeny without checking the model invariants; see
    /// [`SpeciesPhylogeny::validate`].
    pub fn from_parts(
        tree: RootedTree,
        time: Vec<W>,
        hgt_rate: Vec<W>,
        subst_rate: Vec<W>,
    ) -> Result<Self> {
        let n = tree.len();
        if time.len() != n || hgt_rate.len() != n || subst_rate.len() != n {
            return Err(Error::InvalidTree("edge vectors do not match vertex count".into()));
        }
        let (tree, order) = tree.canonicalized();
        let pick = |v: &Vec<W>| -> Vec<W> {
            order
                .iter()
                .enumerate()
                .map(|(i, o)| if i == 0 { W::zero() } else { v[o.index()] })
                .collect()
        };
        let (time, hgt_rate, subst_rate) = (pick(&time), pick(&hgt_rate), pick(&subst_rate));
        let mut depth = vec![W::zero(); n];
        for v in tree.preorder_all() {
            if let Some(p) = tree.parent(v) {
                depth[v.index()] = depth[p.index()] + time[v.index()];
            }
        }
        Ok(SpeciesPhylogeny { tree, time, hgt_rate, subst_rate, depth })
    }

    /// Like [`SpeciesPhylogeny::from_parts`] but rejects invalid phylogenies.
    pub fn new(
        tree: RootedTree,
        time: Vec<W>,
        hgt_rate: Vec<W>,
        subst_rate: Vec<W>,
    ) -> Result<Self> {
        let s = Self::from_parts(tree, time, hgt_rate, subst_rate)?;
        match s.validate().first() {
            None => Ok(s),
            Some(v) => Err(Error::InvalidTree(v.to_string())),
        }
    }

    /// Every edge gets time `tau`, HGT rate `lambda` and substitution rate `mu`.
    pub fn uniform(tree: RootedTree, tau: W, lambda: W, mu: W) -> Result<Self> {
        let n = tree.len();
        Self::new(tree, vec![tau; n], vec![lambda; n], vec![mu; n])
    }

    pub fn from_newick(text: &str) -> Result<Self> {
        crate::newick::parse(text)?.species()
    }

    pub fn to_newick(&self) -> String {
        crate::newick::write_species(self)
    }

    pub fn validate(&self) -> Vec<Violation> {
        let t = &self.tree;
        let mut out = Vec::new();
        let root = t.root();
        let rd = t.children(root).len();
        if rd != 2 {
            out.push(Violation::RootDegree { found: rd });
        }
        let mut seen = std::collections::HashSet::new();
        for v in t.preorder_all() {
            if v != root {
                let k = t.children(v).len();
                if k != 0 && k != 2 {
                    out.push(Violation::InternalDegree { node: v, found: k + 1 });
                }
                if !(self.time[v.index()] > W::zero()) {
                    out.push(Violation::NonPositiveTime { node: v });
                }
                if !(self.hgt_rate[v.index()] >= W::zero()) {
                    out.push(Violation::NegativeHgtRate { node: v });
                }
                if !(self.subst_rate[v.index()] > W::zero()) {
                    out.push(Violation::NonPositiveSubstRate { node: v });
                }
            }
            if t.is_leaf(v) {
                match t.label(v) {
                    None => out.push(Violation::UnlabelledLeaf { node: v }),
                    Some(l) => {
                        if !seen.insert(l) {
                            out.push(Violation::DuplicateLabel { label: l });
                        }
                    }
                }
            }
        }
        // Spread of leaf depths below each vertex.
        let mut lo = vec![W::infinity(); t.len()];
        let mut hi = vec![W::neg_infinity(); t.len()];
        for v in t.postorder_all() {
            if t.is_leaf(v) {
                lo[v.index()] = self.depth[v.index()];
                hi[v.index()] = self.depth[v.index()];
            }
            for &c in t.children(v) {
                lo[v.index()] = lo[v.index()].min(lo[c.index()]);
                hi[v.index()] = hi[v.index()].max(hi[c.index()]);
            }
        }
        for v in t.preorder_all() {
            let spread = (hi[v.index()] - lo[v.index()]).as_f64();
            let tol = W::tolerance().as_f64();
            if !t.is_leaf(v) && spread > tol {
                // Report only the deepest offending vertices.
                let kids_ok = t.children(v).iter().all(|c| (hi[c.index()] - lo[c.index()]).as_f64() <= tol);
                if kids_ok {
                    out.push(Violation::NotUltrametric { node: v, spread });
                }
            }
        }
        out
    }

    pub fn tree(&self) -> &RootedTree {
        &self.tree
    }

    pub fn root(&self) -> NodeId {
        self.tree.root()
    }

    pub fn leaf_count(&self) -> usize {
        self.tree.labels().len()
    }

    /// Non-root vertices, each standing for the edge above it.
    pub fn edges(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.tree.nodes().filter(move |&v| v != self.tree.root())
    }

    #[inline]
    pub fn time(&self, e: NodeId) -> W {
        self.time[e.index()]
    }

    #[inline]
    pub fn hgt_rate(&self, e: NodeId) -> W {
        self.hgt_rate[e.index()]
    }

    #[inline]
    pub fn subst_rate(&self, e: NodeId) -> W {
        self.subst_rate[e.index()]
    }

    pub fn times(&self) -> &[W] {
        &self.time
    }

    pub fn hgt_rates(&self) -> &[W] {
        &self.hgt_rate
    }

    pub fn subst_rates(&self) -> &[W] {
        &self.subst_rate
    }

    /// Root depth of vertex `v`.
    #[inline]
    pub fn depth(&self, v: NodeId) -> W {
        self.depth[v.index()]
    }

    /// Root depth of the upper endpoint of edge `e`.
    #[inline]
    pub fn top(&self, e: NodeId) -> W {
        self.depth[e.index()] - self.time[e.index()]
    }

    /// Common root depth of the leaves.
    pub fn height(&self) -> W {
        let leaf = self.tree.preorder_all().into_iter().find(|&v| self.tree.is_leaf(v));
        self.depth(leaf.expect("nonempty tree"))
    }

    /// τ-length of the path between two leaves.
    pub fn species_metric(&self, a: Label, b: Label) -> Result<W> {
        let (u, v) = (self.tree.leaf(a)?, self.tree.leaf(b)?);
        let m = self.tree.mrca(&[u, v])?;
        Ok(self.depth(u) + self.depth(v) - self.depth(m) - self.depth(m))
    }

    /// Λ_tot = Σ λ(e)·τ(e), the expected number of transfers per gene.
    pub fn total_hgt_weight(&self) -> W {
        self.edges().map(|e| self.hgt_rate(e) * self.time(e)).sum()
    }

    pub fn min_time(&self) -> W {
        self.edges().map(|e| self.time(e)).fold(W::infinity(), W::min)
    }

    pub fn min_subst_rate(&self) -> W {
        self.edges().map(|e| self.subst_rate(e)).fold(W::infinity(), W::min)
    }

    pub fn with_hgt_rates(mut self, rates: Vec<W>) -> Result<Self> {
        if rates.len() != self.tree.len() {
            return Err(Error::InvalidTree("rate vector does not match vertex count".into()));
        }
        self.hgt_rate = rates;
        self.hgt_rate[self.tree.root().index()] = W::zero();
        Ok(self)
    }

    pub fn with_subst_rates(mut self, rates: Vec<W>) -> Result<Self> {
        if rates.len() != self.tree.len() {
            return Err(Error::InvalidTree("rate vector does not match vertex count".into()));
        }
        self.subst_rate = rates;
        self.subst_rate[self.tree.root().index()] = W::zero();
        Ok(self)
    }

    pub fn unrooted_shape(&self) -> super::Shape<Option<Label>> {
        self.tree.to_unrooted().shape()
    }
}

/// Box constraints of the bounded-rates model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundedRates<W> {
    pub lambda_bar: W,
    pub rho_lambda: W,
    pub tau_bar: W,
    pub rho_tau: W,
    pub mu_bar: W,
    pub rho_mu: W,
}

impl<W: Scalar> Default for BoundedRates<W> {
    fn default() -> Self {
        BoundedRates {
            lambda_bar: W::of(0.05),
            rho_lambda: W::one(),
            tau_bar: W::one(),
            rho_tau: W::of(0.1),
            mu_bar: W::one(),
            rho_mu: W::of(0.5),
        }
    }
}

impl<W: Scalar> BoundedRates<W> {
    pub fn check(&self) -> Result<()> {
        let unit = |x: W, open: bool| (if open { x > W::zero() } else { x >= W::zero() }) && x <= W::one();
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        if !unit(self.rho_lambda, false) {
            return bad("rho_lambda must lie in [0, 1]");
        }
        if !unit(self.rho_tau, true) || !unit(self.rho_mu, true) {
            return bad("rho_tau and rho_mu must lie in (0, 1]");
        }
        if !(self.lambda_bar >= W::zero()) {
            return bad("lambda_bar must be nonnegative");
        }
        if !(self.tau_bar > W::zero()) || !(self.mu_bar > W::zero()) {
            return bad("tau_bar and mu_bar must be positive");
        }
        Ok(())
    }

    pub fn tau_min(&self) -> W {
        self.rho_tau * self.tau_bar
    }

    pub fn mu_min(&self) -> W {
        self.rho_mu * self.mu_bar
    }

    pub fn lambda_min(&self) -> W {
        self.rho_lambda * self.lambda_bar
    }
}

pub(crate) fn uniform<W: Scalar, R: Rng + ?Sized>(rng: &mut R, lo: W, hi: W) -> W {
    if lo >= hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

const SHAPE_ATTEMPTS: usize = 1000;

/// Random bounded-rates phylogeny on leaves `1..=n`: coalescent shape,
/// node heights drawn top-down inside their feasible intervals, rates drawn
/// uniformly from their boxes.
pub fn random_phylogeny<W: Scalar>(
    n: usize,
    params: &BoundedRates<W>,
    seed: u64,
) -> Result<SpeciesPhylogeny<W>> {
    if n < 2 {
        return Err(Error::InvalidParameter("need at least two leaves".into()));
    }
    params.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (a, b) = (params.tau_min(), params.tau_bar);
    for _ in 0..SHAPE_ATTEMPTS {
        let mut f = Forest::new();
        let mut lineages: Vec<NodeId> = (1..=n as Label).map(|l| f.add_node(Some(l))).collect();
        while lineages.len() > 1 {
            let i = rng.random_range(0..lineages.len());
            let x = lineages.swap_remove(i);
            let j = rng.random_range(0..lineages.len());
            let y = lineages.swap_remove(j);
            lineages.push(f.join(x, y));
        }
        let tree = RootedTree::from_forest(f, lineages[0]);

        // Feasible height intervals, bottom-up.
        let mut lo = vec![W::zero(); tree.len()];
        let mut hi = vec![W::zero(); tree.len()];
        let mut feasible = true;
        for v in tree.postorder_all() {
            if tree.is_leaf(v) {
                continue;
            }
            let (mut l, mut h) = (W::neg_infinity(), W::infinity());
            for &c in tree.children(v) {
                l = l.max(lo[c.index()] + a);
                h = h.min(hi[c.index()] + b);
            }
            if l > h {
                feasible = false;
                break;
            }
            lo[v.index()] = l;
            hi[v.index()] = h;
        }
        if !feasible {
            continue;
        }

        let mut height = vec![W::zero(); tree.len()];
        let root = tree.root();
        height[root.index()] = uniform(&mut rng, lo[root.index()], hi[root.index()]);
        for v in tree.preorder_all() {
            if v == root || tree.is_leaf(v) {
                continue;
            }
            let hp = height[tree.parent(v).expect("non-root").index()];
            let l = lo[v.index()].max(hp - b);
            let h = hi[v.index()].min(hp - a);
            height[v.index()] = uniform(&mut rng, l, h.max(l));
        }
        let mut time = vec![W::zero(); tree.len()];
        let mut lambda = vec![W::zero(); tree.len()];
        let mut mu = vec![W::zero(); tree.len()];
        for v in tree.preorder_all() {
            if let Some(p) = tree.parent(v) {
                time[v.index()] = height[p.index()] - height[v.index()];
                lambda[v.index()] = uniform(&mut rng, params.lambda_min(), params.lambda_bar);
                mu[v.index()] = uniform(&mut rng, params.mu_min(), params.mu_bar);
            }
        }
        return SpeciesPhylogeny::new(tree, time, lambda, mu);
    }
    Err(Error::Infeasible { attempts: SHAPE_ATTEMPTS })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn balanced() -> SpeciesPhylogeny<f64> {
        SpeciesPhylogeny::from_newick("((1:1,2:1):1,(3:1,4:1):1);").unwrap()
    }

    #[test]
    fn validate_examples() {
        assert!(balanced().validate().is_empty());
        let skewed = SpeciesPhylogeny::<f64>::from_parts(
            RootedTree::from_newick("((1,2),(3,4));").unwrap(),
            vec![0.0, 1.0, 2.0, 1.0, 1.0, 1.0, 1.0],
            vec![0.0; 7],
            vec![1.0; 7],
        )
        .unwrap();
        assert!(matches!(skewed.validate()[..], [Violation::NotUltrametric { .. }]));
        let tri = RootedTree::from_newick("(1,2,3);").unwrap();
        let s = SpeciesPhylogeny::<f64>::from_parts(tri, vec![1.0; 4], vec![0.0; 4], vec![1.0; 4]);
        assert!(s.unwrap().validate().contains(&Violation::RootDegree { found: 3 }));
    }

    #[test]
    fn metric_examples() {
        let s = balanced();
        assert_eq!(s.species_metric(1, 2).unwrap(), 2.0);
        assert_eq!(s.species_metric(1, 3).unwrap(), 4.0);
        assert_eq!(s.species_metric(4, 4).unwrap(), 0.0);
        assert_eq!(s.species_metric(1, 7), Err(Error::UnknownLabel(7)));
        assert_eq!(s.total_hgt_weight(), 0.0);
    }

    #[test]
    fn random_cherry_and_determinism() {
        let p = BoundedRates::<f64>::default();
        let s = random_phylogeny(2, &p, 3).unwrap();
        let e: Vec<_> = s.edges().collect();
        assert_eq!(s.time(e[0]), s.time(e[1]));
        assert!(s.time(e[0]) >= 0.1 && s.time(e[0]) <= 1.0);
        let a = random_phylogeny::<f64>(16, &p, 7).unwrap();
        let b = random_phylogeny::<f64>(16, &p, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.validate().is_empty());
        let c = random_phylogeny::<f32>(16, &BoundedRates::default(), 7).unwrap();
        assert!(c.validate().is_empty());
    }

    #[test]
    fn rejects_bad_parameters() {
        let p = BoundedRates::<f64> { rho_tau: 0.0, ..BoundedRates::default() };
        assert!(random_phylogeny(8, &p, 1).is_err());
        assert!(random_phylogeny(1, &BoundedRates::<f64>::default(), 1).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn random_trees_are_valid_and_in_box(n in 2usize..=64, seed in any::<u64>()) {
            let p = BoundedRates { lambda_bar: 0.3, rho_lambda: 0.5, ..BoundedRates::<f64>::default() };
            let s = random_phylogeny(n, &p, seed).unwrap();
            prop_assert!(s.validate().is_empty());
            prop_assert_eq!(s.leaf_count(), n);
            for e in s.edges() {
                prop_assert!(s.time(e) >= p.tau_min() - 1e-12 && s.time(e) <= p.tau_bar + 1e-12);
                prop_assert!(s.hgt_rate(e) >= 0.15 && s.hgt_rate(e) <= 0.3);
                prop_assert!(s.subst_rate(e) >= p.mu_min() && s.subst_rate(e) <= p.mu_bar);
            }
        }

        #[test]
        fn species_metric_axioms(n in 2usize..=64, seed in any::<u64>()) {
            let s = random_phylogeny::<f64>(n, &BoundedRates::default(), seed).unwrap();
            let m = |a: usize, b: usize| s.species_metric(a as Label, b as Label).unwrap();
            let k = n.min(12);
            for a in 1..=k {
                prop_assert_eq!(m(a, a), 0.0);
                for b in 1..=k {
                    prop_assert_eq!(m(a, b), m(b, a));
                    if a != b { prop_assert!(m(a, b) > 0.0); }
                    for c in 1..=k {
                        prop_assert!(m(a, c) <= m(a, b) + m(b, c) + 1e-9);
                    }
                }
            }
        }
    }
}
