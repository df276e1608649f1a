//! Unrooted reconstruction from contracted gene trees by cherry picking:
//! roots of the growing subtrees are located in every gene through an
//! embedded diluted subtree, and two subtrees are joined when the median
//! graph distance between their roots is two.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::distortion::{estimate, Estimate, Failure};
use super::{cherries, median_leaf_distances, support_threshold, Clusters, Pruning};
use crate::diluted::{Host, Matcher, Scan};
use crate::error::Result;
use crate::observation::ContractedGeneTree;
use crate::tree::{Forest, Label, NodeId, RootedTree, UnrootedTree};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ContractionParams {
    /// Overrides [`support_threshold`].
    pub min_support: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JoinRecord {
    pub step: usize,
    pub left: Vec<Label>,
    pub right: Vec<Label>,
    pub dhat: u32,
    pub support: usize,
    /// Genes locating a unique root for the joined tree.
    pub embedded: usize,
    /// Genes with embeddings at more than one root.
    pub ambiguous: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContractionReport {
    pub genes: usize,
    pub leaves: usize,
    pub support_threshold: usize,
    pub cherries: Vec<(Label, Label)>,
    pub joins: Vec<JoinRecord>,
    pub newick: Option<String>,
    pub failure: Option<Failure>,
    pub matches_truth: Option<bool>,
    #[serde(skip)]
    pub tree: Option<UnrootedTree>,
}

impl ContractionReport {
    pub fn check_against(&mut self, truth: &UnrootedTree) -> bool {
        let ok = self.tree.as_ref().is_some_and(|t| t.same_topology(truth));
        self.matches_truth = Some(ok);
        ok
    }

    /// The pruning before the first join and after each join.
    pub fn prunings(&self) -> Vec<Pruning> {
        let mut c = Clusters::singletons(self.leaves);
        let mut out = vec![Pruning { trees: c.trees() }];
        for j in &self.joins {
            let find = |c: &Clusters, l: &[Label]| *c.active.iter().find(|&&v| c.labels(v) == l).expect("active tree");
            let (a, b) = (find(&c, &j.left), find(&c, &j.right));
            c.join(a, b);
            out.push(Pruning { trees: c.trees() });
        }
        out
    }
}

fn star(n: usize) -> UnrootedTree {
    let mut f = Forest::new();
    let root = f.add_node(None);
    for l in 1..=n as Label {
        f.add_child(root, Some(l));
    }
    RootedTree::from_forest(f, root).to_unrooted()
}

pub fn reconstruct_from_contractions(
    observations: &[ContractedGeneTree],
    params: &ContractionParams,
) -> Result<ContractionReport> {
    let dhat = median_leaf_distances(observations)?;
    let n = dhat.n();
    let genes = observations.len();
    let threshold = params.min_support.unwrap_or_else(|| support_threshold(genes));
    let mut report = ContractionReport {
        genes,
        leaves: n,
        support_threshold: threshold,
        cherries: Vec::new(),
        joins: Vec::new(),
        newick: None,
        failure: None,
        matches_truth: None,
        tree: None,
    };
    // Up to three leaves there is a single unrooted topology.
    if n <= 3 {
        let t = star(n);
        report.newick = Some(t.to_newick());
        report.tree = Some(t);
        return Ok(report);
    }
    match cherries(&dhat) {
        Ok(c) => report.cherries = c,
        Err(e) => {
            report.failure = Some(Failure { reason: e.to_string(), pair: None });
            return Ok(report);
        }
    }

    let hosts: Vec<Host> = observations.par_iter().map(|o| Host::unrooted(&o.topology)).collect();
    let mut matchers: Vec<Matcher<'_>> = hosts.iter().map(Matcher::new).collect();
    // Located root of each tree per gene.
    let mut roots: Vec<Vec<Option<NodeId>>> = hosts
        .iter()
        .map(|h| (1..=n as Label).map(|l| h.leaf(l)).collect())
        .collect();

    let mut c = Clusters::singletons(n);
    let mut est: HashMap<(NodeId, NodeId), Estimate<u32>> = HashMap::new();
    for a in 1..=n as Label {
        for b in a + 1..=n as Label {
            est.insert((NodeId(a - 1), NodeId(b - 1)), Estimate { value: Some(dhat.get(a, b)), support: genes });
        }
    }
    let lookup = |est: &HashMap<(NodeId, NodeId), Estimate<u32>>, a: NodeId, b: NodeId| est[&(a.min(b), a.max(b))];
    let trusted = |e: Estimate<u32>| e.support >= threshold && e.value == Some(2);

    let mut queue: Vec<(NodeId, NodeId)> =
        report.cherries.iter().map(|&(a, b)| (NodeId(a - 1), NodeId(b - 1))).collect();
    queue.reverse();
    while c.active.len() > 2 {
        let next = queue
            .pop()
            .or_else(|| c.pairs().into_iter().find(|&(a, b)| trusted(lookup(&est, a, b))));
        let Some((a, b)) = next else {
            report.failure = Some(Failure {
                reason: format!("no trusted pair of roots at distance 2 with {} trees left", c.active.len()),
                pair: None,
            });
            return Ok(report);
        };
        let e = lookup(&est, a, b);
        let (left, right) = (c.labels(a), c.labels(b));
        let v = c.join(a, b);
        let forest = &c.forest;
        let scans: Vec<Scan> = matchers.par_iter_mut().map(|m| m.unique(forest, v)).collect();
        for (r, s) in roots.iter_mut().zip(&scans) {
            r.resize(v.index() + 1, None);
            r[v.index()] = match s {
                Scan::Unique(e) => Some(e.root),
                _ => None,
            };
        }
        for &f in &c.active {
            if f == v {
                continue;
            }
            let values: Vec<u32> = (0..genes)
                .filter_map(|i| Some(hosts[i].distance(roots[i][f.index()]?, roots[i][v.index()]?)))
                .collect();
            est.insert((f.min(v), f.max(v)), estimate(values));
        }
        report.joins.push(JoinRecord {
            step: report.joins.len(),
            left,
            right,
            dhat: e.value.unwrap_or(u32::MAX),
            support: e.support,
            embedded: scans.iter().filter(|s| matches!(s, Scan::Unique(_))).count(),
            ambiguous: scans.iter().filter(|s| matches!(s, Scan::Ambiguous(_))).count(),
        });
    }
    let (a, b) = (c.active[0], c.active[1]);
    let top = c.forest.join(a, b);
    let t = c.forest.extract(top).to_unrooted();
    report.newick = Some(t.to_newick());
    report.tree = Some(t);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(s: &str, i: usize) -> ContractedGeneTree {
        ContractedGeneTree { topology: UnrootedTree::from_newick(s).unwrap(), gene_index: i }
    }

    #[test]
    fn exact_on_a_single_true_tree() {
        let truth = "((((1,2),3),(4,5)),((6,7),8));";
        let mut r = reconstruct_from_contractions(&[obs(truth, 0)], &ContractionParams::default()).unwrap();
        assert!(r.failure.is_none(), "{:?}", r.failure);
        assert!(r.check_against(&UnrootedTree::from_newick(truth).unwrap()));
        assert_eq!(r.cherries, vec![(1, 2), (4, 5), (6, 7)]);
        let states = r.prunings();
        assert_eq!(states.len(), r.joins.len() + 1);
        for (k, p) in states.iter().enumerate() {
            assert_eq!(p.edge_count(), 2 * k);
            assert!(p.violations(&r.tree.clone().unwrap()).is_empty());
        }
        assert_eq!(states.last().unwrap().edge_count(), 2 * 8 - 4);
    }

    #[test]
    fn stars_fail_cleanly() {
        let g: Vec<_> = (0..6).map(|i| obs("(1,2,3,4,5,6);", i)).collect();
        let r = reconstruct_from_contractions(&g, &ContractionParams::default()).unwrap();
        assert!(r.failure.is_some());
        assert!(r.tree.is_none());
    }

    #[test]
    fn tiny_inputs() {
        let r = reconstruct_from_contractions(&[obs("((1,2),3);", 0)], &ContractionParams::default()).unwrap();
        assert_eq!(r.tree.unwrap().labels(), vec![1, 2, 3]);
    }
}
