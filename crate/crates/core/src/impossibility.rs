//! Coupled transfer processes on two phylogenies that differ by swapping two
//! small subtrees of a complete binary tree. With transfers confined to
//! those subtrees and frequent enough, the two gene trees usually coincide.

use std::collections::{HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hgt::{execute_hgt, simulate_gene, DonorPolicy, GeneSample, GeneTree, HgtEvent, Location, RateModel, SimConfig};
use crate::observation::{contract, ContractionPolicy};
use crate::tree::{Forest, Label, NodeId, RootedTree, SpeciesPhylogeny, UnrootedTree};

/// Complete binary tree `t` with `2^h` unit edges deep, its swapped twin
/// `t_bar`, and the leaf sets of the two swapped subtrees.
#[derive(Clone, Debug, PartialEq)]
pub struct LowerBoundPair {
    pub h: u32,
    pub lambda_bar: f64,
    pub t: SpeciesPhylogeny<f64>,
    pub t_bar: SpeciesPhylogeny<f64>,
    pub l1: Vec<Label>,
    pub l3: Vec<Label>,
}

impl LowerBoundPair {
    pub fn leaf_count(&self) -> usize {
        1 << self.h
    }

    /// Depth of the roots of the swapped subtrees.
    pub fn swap_level(&self) -> u32 {
        2 * self.h / 3
    }

    fn in_swapped(&self, labels: &[Label]) -> bool {
        let m = self.l1.len() as Label;
        labels.iter().all(|&l| l <= m || (2 * m < l && l <= 3 * m))
    }
}

fn complete_tree(order: &[Label]) -> RootedTree {
    fn grow(f: &mut Forest, parent: NodeId, leaves: &[Label]) {
        if let [l] = leaves {
            f.add_child(parent, Some(*l));
            return;
        }
        let v = f.add_child(parent, None);
        let (a, b) = leaves.split_at(leaves.len() / 2);
        grow(f, v, a);
        grow(f, v, b);
    }
    let mut f = Forest::new();
    let root = f.add_node(None);
    let (a, b) = order.split_at(order.len() / 2);
    grow(&mut f, root, a);
    grow(&mut f, root, b);
    RootedTree::from_forest(f, root)
}

/// The complete binary root already has degree two, so no subdivision is
/// needed.
pub fn build_pair(h: u32, lambda_bar: f64) -> Result<LowerBoundPair> {
    if h < 3 || !h.is_multiple_of(3) {
        return Err(Error::InvalidParameter(format!("height {h} must be a positive multiple of 3")));
    }
    if h > 24 || !(lambda_bar >= 0.0) {
        return Err(Error::InvalidParameter("height at most 24 and a nonnegative rate are required".into()));
    }
    let n = 1usize << h;
    let m = 1usize << (h / 3);
    let l1: Vec<Label> = (1..=m as Label).collect();
    let l3: Vec<Label> = (2 * m as Label + 1..=3 * m as Label).collect();
    let straight: Vec<Label> = (1..=n as Label).collect();
    let mut swapped = straight.clone();
    for i in 0..m {
        swapped.swap(i, 2 * m + i);
    }
    let make = |order: &[Label]| -> Result<SpeciesPhylogeny<f64>> {
        let t = complete_tree(order);
        let mut leaves = vec![0usize; t.len()];
        let mut inside = vec![false; t.len()];
        for v in t.postorder_all() {
            if t.is_leaf(v) {
                leaves[v.index()] = 1;
                let l = t.label(v).expect("leaf label") as usize;
                inside[v.index()] = l <= m || (2 * m < l && l <= 3 * m);
            } else {
                let kids = t.children(v);
                leaves[v.index()] = kids.iter().map(|c| leaves[c.index()]).sum();
                inside[v.index()] = kids.iter().all(|c| inside[c.index()]);
            }
        }
        let k = t.len();
        let root = t.root();
        // Edges strictly below the roots of the two swapped subtrees.
        let lambda = t
            .nodes()
            .map(|v| if inside[v.index()] && leaves[v.index()] < m { lambda_bar } else { 0.0 })
            .collect();
        let time = t.nodes().map(|v| if v == root { 0.0 } else { 1.0 }).collect();
        SpeciesPhylogeny::new(t, time, lambda, vec![1.0; k])
    };
    Ok(LowerBoundPair { h, lambda_bar, t: make(&straight)?, t_bar: make(&swapped)?, l1, l3 })
}

/// A transfer described by leaf sets and time, so that it can be replayed on
/// any tree that has edges with the same leaf sets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferDescriptor {
    pub recipient_leafset: Vec<Label>,
    pub donor_leafset: Vec<Label>,
    pub root_distance: f64,
}

pub fn describe(s: &SpeciesPhylogeny<f64>, events: &[HgtEvent<f64>]) -> Vec<TransferDescriptor> {
    events
        .iter()
        .map(|e| TransferDescriptor {
            recipient_leafset: s.tree().leaf_labels(e.recipient.edge),
            donor_leafset: s.tree().leaf_labels(e.donor.edge),
            root_distance: e.time,
        })
        .collect()
}

fn edge_index(s: &SpeciesPhylogeny<f64>) -> HashMap<Vec<Label>, NodeId> {
    s.edges().map(|e| (s.tree().leaf_labels(e), e)).collect()
}

/// Events on `s` matching `descriptors`.
pub fn replay(s: &SpeciesPhylogeny<f64>, descriptors: &[TransferDescriptor]) -> Result<Vec<HgtEvent<f64>>> {
    let index = edge_index(s);
    let tol = 1e-9;
    let locate = |set: &[Label], t: f64| -> Result<Location<f64>> {
        let &edge = index
            .get(set)
            .ok_or_else(|| Error::NotReplayable(format!("no edge above exactly {set:?}")))?;
        let offset = t - s.top(edge);
        if offset < -tol || offset > s.time(edge) + tol {
            return Err(Error::NotReplayable(format!("edge above {set:?} does not cross depth {t}")));
        }
        Ok(Location { edge, offset: offset.clamp(0.0, s.time(edge)) })
    };
    descriptors
        .iter()
        .map(|d| {
            Ok(HgtEvent {
                recipient: locate(&d.recipient_leafset, d.root_distance)?,
                donor: locate(&d.donor_leafset, d.root_distance)?,
                time: d.root_distance,
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub events: usize,
    /// Events whose donor lies inside one of the swapped subtrees.
    pub in_moves: usize,
    pub self_transfers: usize,
    pub cut1: bool,
    pub cut3: bool,
    pub identical: bool,
}

impl Diagnostics {
    /// No in-move and both subtrees cut off by transfers.
    pub fn qualifies(&self) -> bool {
        self.in_moves == 0 && self.cut1 && self.cut3
    }
}

#[derive(Clone, Debug)]
pub struct CoupledRun {
    pub sample: GeneSample<f64>,
    pub gene_bar: GeneTree<f64>,
    pub topology: UnrootedTree,
    pub topology_bar: UnrootedTree,
    pub descriptors: Vec<TransferDescriptor>,
    pub diagnostics: Diagnostics,
}

pub fn coupling_config() -> SimConfig<f64> {
    SimConfig { rates: RateModel::Species, donor_policy: DonorPolicy::IncludeRecipient }
}

/// Whether every path from the subtree root above `labels` down to its
/// leaves crosses an edge holding a recipient.
fn transfer_cut(s: &SpeciesPhylogeny<f64>, labels: &[Label], closed: &HashSet<NodeId>) -> bool {
    let t = s.tree();
    let leaves: Vec<NodeId> = labels.iter().map(|&l| t.leaf(l).expect("leaf")).collect();
    let top = t.mrca(&leaves).expect("nonempty");
    let mut stack: Vec<NodeId> = t.children(top).iter().copied().filter(|c| !closed.contains(c)).collect();
    while let Some(v) = stack.pop() {
        if t.is_leaf(v) {
            return false;
        }
        stack.extend(t.children(v).iter().copied().filter(|c| !closed.contains(c)));
    }
    true
}

/// Gene `index` of `seed` on `t`, replayed on `t_bar`.
pub fn coupled_run_indexed(pair: &LowerBoundPair, seed: u64, index: usize) -> Result<CoupledRun> {
    let sample = simulate_gene(&pair.t, &coupling_config(), seed, index)?;
    let descriptors = describe(&pair.t, &sample.events);
    let events_bar = replay(&pair.t_bar, &descriptors)?;
    let gene_bar = execute_hgt(&pair.t_bar, &events_bar, pair.t_bar.subst_rates())?;
    let topology = contract(&sample.tree, 0.0, ContractionPolicy::All, index)?.topology;
    let topology_bar = contract(&gene_bar, 0.0, ContractionPolicy::All, index)?.topology;
    let closed: HashSet<NodeId> = sample.events.iter().map(|e| e.recipient.edge).collect();
    let diagnostics = Diagnostics {
        events: sample.events.len(),
        in_moves: descriptors.iter().filter(|d| pair.in_swapped(&d.donor_leafset)).count(),
        self_transfers: sample.events.iter().filter(|e| e.is_self_transfer()).count(),
        cut1: transfer_cut(&pair.t, &pair.l1, &closed),
        cut3: transfer_cut(&pair.t, &pair.l3, &closed),
        identical: topology.same_topology(&topology_bar),
    };
    Ok(CoupledRun { sample, gene_bar, topology, topology_bar, descriptors, diagnostics })
}

pub fn coupled_run(pair: &LowerBoundPair, seed: u64) -> Result<CoupledRun> {
    coupled_run_indexed(pair, seed, 0)
}

/// Replays the `t_bar` side back onto `t`.
pub fn replay_back(pair: &LowerBoundPair, run: &CoupledRun) -> Result<GeneTree<f64>> {
    let events_bar = replay(&pair.t_bar, &run.descriptors)?;
    let back = replay(&pair.t, &describe(&pair.t_bar, &events_bar))?;
    execute_hgt(&pair.t, &back, pair.t.subst_rates())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    #[serde(rename = "H")]
    pub h: u32,
    pub n: usize,
    pub lambda: f64,
    pub trials: usize,
    pub identical_rate: f64,
    pub mean_in_moves: f64,
    pub cut1_rate: f64,
    pub cut3_rate: f64,
    pub events: usize,
    pub in_moves: usize,
    /// Runs with no in-move and both cuts present.
    pub qualifying: usize,
    /// Qualifying runs whose outputs differ; zero unless something is wrong.
    pub qualifying_mismatches: usize,
    /// `ceil(n^(1/6))` genes, and the chance all of them coincide if genes
    /// were independent.
    pub genes: usize,
    pub joint_identical_rate: f64,
}

/// Identical-output rates over a grid. Trial `k` uses stream `k` of `seed`
/// in every cell.
pub fn indistinguishability_sweep(hs: &[u32], lambdas: &[f64], trials: usize, seed: u64) -> Result<Vec<SweepRow>> {
    if trials == 0 {
        return Err(Error::InvalidParameter("at least one trial is required".into()));
    }
    let mut rows = Vec::new();
    for &h in hs {
        for &lambda in lambdas {
            let pair = build_pair(h, lambda)?;
            let runs: Vec<Diagnostics> = (0..trials)
                .into_par_iter()
                .map(|k| coupled_run_indexed(&pair, seed, k).map(|r| r.diagnostics))
                .collect::<Result<_>>()?;
            let frac = |f: &dyn Fn(&Diagnostics) -> bool| runs.iter().filter(|d| f(d)).count() as f64 / trials as f64;
            let identical_rate = frac(&|d| d.identical);
            let in_moves: usize = runs.iter().map(|d| d.in_moves).sum();
            let n = pair.leaf_count();
            let genes = (n as f64).powf(1.0 / 6.0).ceil() as usize;
            rows.push(SweepRow {
                h,
                n,
                lambda,
                trials,
                identical_rate,
                mean_in_moves: in_moves as f64 / trials as f64,
                cut1_rate: frac(&|d| d.cut1),
                cut3_rate: frac(&|d| d.cut3),
                events: runs.iter().map(|d| d.events).sum(),
                in_moves,
                qualifying: runs.iter().filter(|d| d.qualifies()).count(),
                qualifying_mismatches: runs.iter().filter(|d| d.qualifies() && !d.identical).count(),
                genes,
                joint_identical_rate: identical_rate.powi(genes as i32),
            });
        }
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(
        "H,n,lambda,trials,identical_rate,mean_in_moves,cut1_rate,cut3_rate,events,in_moves,qualifying,qualifying_mismatches,genes,joint_identical_rate\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.h,
            r.n,
            r.lambda,
            r.trials,
            r.identical_rate,
            r.mean_in_moves,
            r.cut1_rate,
            r.cut3_rate,
            r.events,
            r.in_moves,
            r.qualifying,
            r.qualifying_mismatches,
            r.genes,
            r.joint_identical_rate
        ));
    }
    out
}
