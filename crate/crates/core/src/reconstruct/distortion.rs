//! Rooted reconstruction from distorted gene trees: single linkage whose
//! inter-cluster estimates come from one representative leaf per gene, taken
//! from an embedded diluted subtree of each new cluster.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{median_leaf_distances, support_threshold, Clusters, Truncation};
use crate::diluted::{Host, Matcher};
use crate::error::Result;
use crate::num::{lower_median, Scalar};
use crate::observation::DistortedGeneTree;
use crate::tree::{Label, NodeId, RootedTree};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DistortionParams {
    /// Stop once the closest trusted pair is farther than `depth - epsilon`.
    pub depth: Option<f64>,
    pub epsilon: f64,
    /// Overrides [`support_threshold`].
    pub min_support: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MergeRecord {
    pub step: usize,
    pub left: Vec<Label>,
    pub right: Vec<Label>,
    pub dhat: f64,
    pub support: usize,
    /// Genes in which the merged cluster has an embedded diluted subtree.
    pub embedded: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Failure {
    pub reason: String,
    pub pair: Option<(Vec<Label>, Vec<Label>)>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistortionReport {
    pub genes: usize,
    pub leaves: usize,
    pub support_threshold: usize,
    pub merges: Vec<MergeRecord>,
    /// Clusters when the run stopped.
    pub clusters: Vec<Vec<Label>>,
    pub newick: Option<String>,
    pub failure: Option<Failure>,
    pub matches_truth: Option<bool>,
    #[serde(skip)]
    pub truncation: Truncation,
    #[serde(skip)]
    pub tree: Option<RootedTree>,
}

impl DistortionReport {
    pub fn check_against(&mut self, truth: &RootedTree) -> bool {
        let ok = self.tree.as_ref().is_some_and(|t| t.leafsomorphic(truth));
        self.matches_truth = Some(ok);
        ok
    }
}

#[derive(Clone, Copy, Debug)]
pub(super) struct Estimate<D> {
    pub value: Option<D>,
    pub support: usize,
}

pub(super) fn estimate<D: PartialOrd + Copy>(mut values: Vec<D>) -> Estimate<D> {
    let support = values.len();
    Estimate { value: lower_median(&mut values), support }
}

/// Runs single linkage to completion (or to `params.depth`).
pub fn reconstruct_from_distortions<W: Scalar>(
    observations: &[DistortedGeneTree<W>],
    params: &DistortionParams,
) -> Result<DistortionReport> {
    let dhat = median_leaf_distances(observations)?;
    let n = dhat.n();
    let genes = observations.len();
    let threshold = params.min_support.unwrap_or_else(|| support_threshold(genes));
    let hosts: Vec<Host> = observations.par_iter().map(|o| Host::rooted(&o.tree.tree)).collect();
    let mut matchers: Vec<Matcher<'_>> = hosts.iter().map(Matcher::new).collect();
    // Representative leaf of each cluster per gene.
    let mut reps: Vec<Vec<Option<Label>>> = vec![(1..=n as Label).map(Some).collect(); genes];

    let mut c = Clusters::singletons(n);
    let mut est: HashMap<(NodeId, NodeId), Estimate<W>> = HashMap::new();
    for a in 1..=n as Label {
        for b in a + 1..=n as Label {
            est.insert((NodeId(a - 1), NodeId(b - 1)), Estimate { value: Some(dhat.get(a, b)), support: genes });
        }
    }
    let lookup = |est: &HashMap<(NodeId, NodeId), Estimate<W>>, a: NodeId, b: NodeId| est[&(a.min(b), a.max(b))];
    let stop = params.depth.map(|d| W::of(d - params.epsilon));

    let mut merges = Vec::new();
    let mut failure = None;
    while c.active.len() > 1 {
        let pairs = c.pairs();
        let mut best: Option<(W, NodeId, NodeId, usize)> = None;
        for &(a, b) in &pairs {
            let e = lookup(&est, a, b);
            if let (Some(v), true) = (e.value, e.support >= threshold) {
                if best.is_none_or(|(x, ..)| v < x) {
                    best = Some((v, a, b, e.support));
                }
            }
        }
        let Some((value, a, b, support)) = best else {
            let &(a, b) = pairs
                .iter()
                .min_by_key(|&&(a, b)| lookup(&est, a, b).support)
                .expect("two clusters");
            failure = Some(Failure {
                reason: format!("no pair has support of at least {threshold}"),
                pair: Some((c.labels(a), c.labels(b))),
            });
            break;
        };
        if stop.is_some_and(|s| value > s) {
            break;
        }
        let (left, right) = (c.labels(a), c.labels(b));
        let v = c.join(a, b);
        let forest = &c.forest;
        let new_reps: Vec<Option<Label>> = matchers
            .par_iter_mut()
            .map(|m| {
                let found = !m.matches(forest, v).is_empty();
                found.then(|| m.embedding(v, 0).min_label(m.host())).flatten()
            })
            .collect();
        for (r, x) in reps.iter_mut().zip(&new_reps) {
            r.resize(v.index() + 1, None);
            r[v.index()] = *x;
        }
        for &f in &c.active {
            if f == v {
                continue;
            }
            let values: Vec<W> = (0..genes)
                .filter_map(|i| {
                    let (lf, lv) = (reps[i][f.index()]?, reps[i][v.index()]?);
                    Some(observations[i].metric()[lf as usize - 1][lv as usize - 1])
                })
                .collect();
            est.insert((f.min(v), f.max(v)), estimate(values));
        }
        merges.push(MergeRecord {
            step: merges.len(),
            left,
            right,
            dhat: value.as_f64(),
            support,
            embedded: new_reps.iter().filter(|x| x.is_some()).count(),
        });
    }

    let truncation = Truncation { clusters: c.trees() };
    let tree = (failure.is_none() && c.active.len() == 1).then(|| truncation.clusters[0].clone());
    Ok(DistortionReport {
        genes,
        leaves: n,
        support_threshold: threshold,
        merges,
        clusters: truncation.leaf_sets(),
        newick: tree.as_ref().map(RootedTree::to_newick),
        failure,
        matches_truth: None,
        truncation,
        tree,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::WeightedTree;

    fn obs(s: &str, i: usize) -> DistortedGeneTree<f64> {
        DistortedGeneTree::new(WeightedTree::from_newick(s).unwrap(), i).unwrap()
    }

    #[test]
    fn exact_on_a_single_true_tree() {
        let g = obs("(((1:1,2:1):1,3:2):2,(4:3,5:3):1);", 0);
        let r = reconstruct_from_distortions(std::slice::from_ref(&g), &DistortionParams::default()).unwrap();
        assert!(r.failure.is_none());
        assert_eq!(r.newick.as_deref(), Some("(((1,2),3),(4,5));"));
        assert_eq!(r.merges.len(), 4);
        assert!(r.merges.iter().all(|m| m.embedded == 1));
        let stopped = reconstruct_from_distortions(&[g], &DistortionParams { depth: Some(4.5), ..Default::default() })
            .unwrap();
        assert_eq!(stopped.clusters, vec![vec![1, 2, 3], vec![4], vec![5]]);
        assert!(stopped.tree.is_none());
    }

    #[test]
    fn majority_wins_over_a_moved_leaf() {
        let good = "(((1:1,2:1):1,3:2):2,(4:3,5:3):1);";
        let moved = "(((1:1,5:1):1,3:2):2,(4:3,2:3):1);";
        let mut g: Vec<_> = (0..7).map(|i| obs(good, i)).collect();
        g.extend((7..10).map(|i| obs(moved, i)));
        let r = reconstruct_from_distortions(&g, &DistortionParams::default()).unwrap();
        assert_eq!(r.newick.as_deref(), Some("(((1,2),3),(4,5));"));
        assert_eq!(r.support_threshold, 5);
    }

    #[test]
    fn reports_unsupported_pairs() {
        let g: Vec<_> = (0..3).map(|i| obs("((1:1,2:1):1,3:2);", i)).collect();
        let p = DistortionParams { min_support: Some(4), ..Default::default() };
        let r = reconstruct_from_distortions(&g, &p).unwrap();
        let f = r.failure.unwrap();
        assert_eq!(f.pair, Some((vec![1], vec![2])));
        assert!(r.tree.is_none());
    }
}
