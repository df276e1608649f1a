//! Poisson HGT events on a species phylogeny and their execution as SPR
//! moves on the gene tree.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::tree::{species::uniform, Label, NodeId, RootedTree, SpeciesPhylogeny, WeightedTree};

/// A point on a species edge: `offset` is the time below the edge's upper
/// endpoint.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Location<W> {
    pub edge: NodeId,
    pub offset: W,
}

impl<W: Scalar> Location<W> {
    pub fn root_depth(&self, s: &SpeciesPhylogeny<W>) -> W {
        s.top(self.edge) + self.offset
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HgtEvent<W> {
    pub recipient: Location<W>,
    pub donor: Location<W>,
    pub time: W,
}

impl<W: Scalar> HgtEvent<W> {
    pub fn is_self_transfer(&self) -> bool {
        self.recipient.edge == self.donor.edge
    }
}

/// Whether the recipient's own branch point is a possible donor.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DonorPolicy {
    #[default]
    ExcludeRecipient,
    /// A self-transfer is drawn with probability `1/|B_x|` and is a no-op.
    IncludeRecipient,
}

/// Whether species edge `e` covers root depth `t`. A vertex depth belongs to
/// the edges below the vertex; pendant edges also cover the leaf depth.
fn covers<W: Scalar>(s: &SpeciesPhylogeny<W>, e: NodeId, t: W) -> bool {
    let (top, bottom) = (s.top(e), s.depth(e));
    top <= t && (t < bottom || (s.tree().is_leaf(e) && t <= bottom + W::tolerance()))
}

/// `B_x`: one point per species edge crossing the root depth of `x`,
/// including `x` itself.
pub fn contemporaneous_points<W: Scalar>(s: &SpeciesPhylogeny<W>, x: &Location<W>) -> Vec<Location<W>> {
    points_at_depth(s, x.root_depth(s))
}

pub fn points_at_depth<W: Scalar>(s: &SpeciesPhylogeny<W>, t: W) -> Vec<Location<W>> {
    s.edges()
        .filter(|&e| covers(s, e, t))
        .map(|e| Location { edge: e, offset: (t - s.top(e)).max(W::zero()).min(s.time(e)) })
        .collect()
}

/// Samples the transfers of one gene, sorted by time (ties by recipient
/// edge). Returns the events and the number of recipients left without a
/// possible donor.
pub fn sample_events<W: Scalar, R: Rng + ?Sized>(
    s: &SpeciesPhylogeny<W>,
    policy: DonorPolicy,
    rng: &mut R,
) -> (Vec<HgtEvent<W>>, usize) {
    let mut events = Vec::new();
    let mut discarded = 0;
    for e in s.edges() {
        let mean = (s.hgt_rate(e) * s.time(e)).as_f64();
        if mean <= 0.0 {
            continue;
        }
        let k = Poisson::new(mean).expect("positive Poisson mean").sample(rng) as usize;
        for _ in 0..k {
            let offset = rng.random_range(W::zero()..s.time(e));
            let recipient = Location { edge: e, offset };
            let time = recipient.root_depth(s);
            let mut b = points_at_depth(s, time);
            if policy == DonorPolicy::ExcludeRecipient {
                b.retain(|p| p.edge != e);
            }
            if b.is_empty() {
                discarded += 1;
                continue;
            }
            let donor = b[rng.random_range(0..b.len())];
            events.push(HgtEvent { recipient, donor, time });
        }
    }
    events.sort_by(|a, b| {
        a.time
            .partial_cmp(&b.time)
            .expect("finite times")
            .then(a.recipient.edge.cmp(&b.recipient.edge))
    });
    (events, discarded)
}

/// Raw gene tree: arena copy of the species tree edited by SPR moves. Each
/// vertex stands for the edge above it, with species edge `eta` and time
/// window `[zeta_b, zeta_f]` measured on that species edge.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneTree<W> {
    pub tree: RootedTree,
    pub eta: Vec<NodeId>,
    pub zeta_b: Vec<W>,
    pub zeta_f: Vec<W>,
    pub weight: Vec<W>,
}

impl<W: Scalar> GeneTree<W> {
    /// Weighted tree over the raw arena (dangling stubs included).
    pub fn weighted(&self) -> WeightedTree<W> {
        WeightedTree { tree: self.tree.clone(), weight: self.weight.clone() }
    }

    /// Cleaned weighted tree: leaf-to-leaf edges only, unary paths merged.
    pub fn cleaned(&self) -> WeightedTree<W> {
        self.weighted().cleaned()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.tree.labels()
    }

    /// Gene edges mapped to species edge `e`, sorted by window start.
    pub fn windows(&self, e: NodeId) -> Vec<(W, W)> {
        let root = self.tree.root();
        let mut w: Vec<(W, W)> = self
            .tree
            .nodes()
            .filter(|&v| v != root && self.eta[v.index()] == e && self.reachable(v))
            .map(|v| (self.zeta_b[v.index()], self.zeta_f[v.index()]))
            .collect();
        w.sort_by(|a, b| a.partial_cmp(b).expect("finite windows"));
        w
    }

    fn reachable(&self, mut v: NodeId) -> bool {
        while let Some(p) = self.tree.parent(v) {
            v = p;
        }
        v == self.tree.root()
    }
}

/// Replays `events` (chronologically sorted) on a copy of the species tree;
/// `subst` holds the gene's substitution rate per species edge.
pub fn execute_hgt<W: Scalar>(
    s: &SpeciesPhylogeny<W>,
    events: &[HgtEvent<W>],
    subst: &[W],
) -> Result<GeneTree<W>> {
    let mut tree = s.tree().clone();
    let n = tree.len();
    let mut eta: Vec<NodeId> = tree.nodes().collect();
    let mut zeta_b = vec![W::zero(); n];
    let mut zeta_f: Vec<W> = s.tree().nodes().map(|v| s.time(v)).collect();
    let mut on_edge: Vec<Vec<NodeId>> = tree.nodes().map(|v| vec![v]).collect();

    let find = |on_edge: &[Vec<NodeId>], zb: &[W], zf: &[W], at: &Location<W>, what| {
        on_edge[at.edge.index()]
            .iter()
            .copied()
            .filter(|g| zb[g.index()] <= at.offset && at.offset <= zf[g.index()])
            .max_by(|a, b| zb[a.index()].partial_cmp(&zb[b.index()]).expect("finite"))
            .ok_or(Error::Uncovered { what, edge: at.edge, offset: at.offset.as_f64() })
    };

    for ev in events {
        if ev.is_self_transfer() {
            continue;
        }
        let gx = find(&on_edge, &zeta_b, &zeta_f, &ev.recipient, "recipient")?;
        let gy = find(&on_edge, &zeta_b, &zeta_f, &ev.donor, "donor")?;
        let u = tree.parent(gy).ok_or(Error::Uncovered {
            what: "donor",
            edge: ev.donor.edge,
            offset: ev.donor.offset.as_f64(),
        })?;

        // Split the donor edge u -> gy at the donor offset with new vertex v.
        let v = tree.add_node(None);
        tree.detach(gy);
        tree.attach(u, v);
        tree.attach(v, gy);
        eta.push(ev.donor.edge);
        zeta_b.push(zeta_b[gy.index()]);
        zeta_f.push(ev.donor.offset);
        zeta_b[gy.index()] = ev.donor.offset;
        on_edge[ev.donor.edge.index()].push(v);

        // Regraft the recipient lineage below v.
        tree.detach(gx);
        tree.attach(v, gx);
        zeta_b[gx.index()] = ev.recipient.offset;
    }

    let weight = tree
        .nodes()
        .map(|v| {
            if v == tree.root() {
                W::zero()
            } else {
                (zeta_f[v.index()] - zeta_b[v.index()]) * subst[eta[v.index()].index()]
            }
        })
        .collect();
    Ok(GeneTree { tree, eta, zeta_b, zeta_f, weight })
}

/// Per-gene substitution rates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateModel<W> {
    /// The rates stored on the species tree, for every gene.
    Species,
    /// One rate for every edge and gene.
    Constant(W),
    /// Independent uniform draw per edge and gene.
    Uniform { lo: W, hi: W },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig<W> {
    pub rates: RateModel<W>,
    pub donor_policy: DonorPolicy,
}

impl<W: Scalar> Default for SimConfig<W> {
    fn default() -> Self {
        SimConfig { rates: RateModel::Species, donor_policy: DonorPolicy::default() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneSample<W> {
    pub gene_index: usize,
    pub seed: u64,
    pub events: Vec<HgtEvent<W>>,
    pub discarded: usize,
    pub subst: Vec<W>,
    pub tree: GeneTree<W>,
}

/// RNG of gene `index` in a batch seeded with `seed`.
pub fn gene_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

pub fn gene_subst_rates<W: Scalar, R: Rng + ?Sized>(
    s: &SpeciesPhylogeny<W>,
    model: &RateModel<W>,
    rng: &mut R,
) -> Vec<W> {
    let root = s.root();
    s.tree()
        .nodes()
        .map(|v| match model {
            _ if v == root => W::zero(),
            RateModel::Species => s.subst_rate(v),
            RateModel::Constant(mu) => *mu,
            RateModel::Uniform { lo, hi } => uniform(rng, *lo, *hi),
        })
        .collect()
}

pub fn simulate_gene<W: Scalar>(
    s: &SpeciesPhylogeny<W>,
    config: &SimConfig<W>,
    seed: u64,
    gene_index: usize,
) -> Result<GeneSample<W>> {
    let mut rng = gene_rng(seed, gene_index);
    let (events, discarded) = sample_events(s, config.donor_policy, &mut rng);
    let subst = gene_subst_rates(s, &config.rates, &mut rng);
    let tree = execute_hgt(s, &events, &subst)?;
    Ok(GeneSample { gene_index, seed, events, discarded, subst, tree })
}

/// `genes` independent samples; gene `i` uses stream `i` of `seed`, so the
/// result does not depend on scheduling.
pub fn simulate_batch<W: Scalar>(
    s: &SpeciesPhylogeny<W>,
    genes: usize,
    seed: u64,
    config: &SimConfig<W>,
) -> Result<Vec<GeneSample<W>>> {
    if genes == 0 {
        return Err(Error::InvalidParameter("gene count must be at least 1".into()));
    }
    (0..genes).into_par_iter().map(|i| simulate_gene(s, config, seed, i)).collect()
}

/// One line of the event log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub gene_index: usize,
    pub recipient_edge: NodeId,
    pub recipient_offset: f64,
    pub donor_edge: NodeId,
    pub donor_offset: f64,
    pub time: f64,
}

impl<W: Scalar> GeneSample<W> {
    pub fn event_records(&self) -> Vec<EventRecord> {
        self.events
            .iter()
            .map(|e| EventRecord {
                gene_index: self.gene_index,
                recipient_edge: e.recipient.edge,
                recipient_offset: e.recipient.offset.as_f64(),
                donor_edge: e.donor.edge,
                donor_offset: e.donor.offset.as_f64(),
                time: e.time.as_f64(),
            })
            .collect()
    }
}
