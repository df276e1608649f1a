//! End-to-end runs of both reconstruction pipelines on simulated data.

use hgt_phylo::hgt::{simulate_batch, RateModel, SimConfig};
use hgt_phylo::observation::{contract, distort, ContractionPolicy, ContractedGeneTree, DistortedGeneTree};
use hgt_phylo::reconstruct::{
    median_leaf_distances, reconstruct_from_contractions, reconstruct_from_distortions, ContractionParams,
    DistortionParams,
};
use hgt_phylo::{random_phylogeny, Phylogeny, Rates};

fn species(n: usize, lambda_bar: f64, rho_mu: f64, seed: u64) -> Phylogeny {
    let params = Rates { lambda_bar, rho_mu, ..Rates::default() };
    random_phylogeny(n, &params, seed).unwrap()
}

fn contracted(s: &Phylogeny, genes: usize, seed: u64) -> Vec<ContractedGeneTree> {
    let eps = 0.5 * s.min_time() * s.min_subst_rate();
    simulate_batch(s, genes, seed, &SimConfig::default())
        .unwrap()
        .iter()
        .map(|g| contract(&g.tree, eps, ContractionPolicy::All, g.gene_index).unwrap())
        .collect()
}

fn distorted(s: &Phylogeny, genes: usize, seed: u64) -> Vec<DistortedGeneTree<f64>> {
    let eps = 0.1 * s.min_time();
    let cfg = SimConfig { rates: RateModel::Constant(1.0), ..SimConfig::default() };
    simulate_batch(s, genes, seed, &cfg)
        .unwrap()
        .iter()
        .map(|g| distort(&g.tree, eps, seed, g.gene_index).unwrap())
        .collect()
}

#[test]
fn hgt_free_single_gene_recovers_the_species_tree() {
    for seed in 0..30u64 {
        let n = 4 + (seed as usize * 7) % 40;
        let s = species(n, 0.0, 0.5, seed);
        let truth = s.tree().to_unrooted();
        let mut r = reconstruct_from_contractions(&contracted(&s, 1, seed), &ContractionParams::default()).unwrap();
        assert!(r.check_against(&truth), "n={n} seed={seed} {:?}", r.failure);
        for p in r.prunings() {
            assert!(p.violations(&truth).is_empty());
        }
        let mut d = reconstruct_from_distortions(&distorted(&s, 1, seed), &DistortionParams::default()).unwrap();
        assert!(d.check_against(s.tree()), "n={n} seed={seed} {:?}", d.failure);
    }
}

#[test]
fn hgt_free_medians_are_species_graph_distances() {
    let s = species(12, 0.0, 0.5, 3);
    let truth = s.tree().to_unrooted();
    let d = median_leaf_distances(&contracted(&s, 1, 3)).unwrap();
    for a in 1..=12 {
        for b in 1..=12 {
            assert_eq!(d.get(a, b), truth.leaf_distance(a, b).unwrap());
        }
    }
}

#[test]
fn noisy_runs_keep_full_prunings() {
    let n = 16;
    let genes = 200;
    for seed in 0..5u64 {
        let s = species(n, 0.05, 0.5, 500 + seed);
        let truth = s.tree().to_unrooted();
        let mut r = reconstruct_from_contractions(&contracted(&s, genes, seed), &ContractionParams::default()).unwrap();
        assert!(r.check_against(&truth), "seed={seed} {:?}", r.failure);
        let states = r.prunings();
        for (k, p) in states.iter().enumerate() {
            assert_eq!(p.edge_count(), 2 * k);
            assert!(p.violations(&truth).is_empty(), "seed={seed} state {k}");
        }
        assert_eq!(states.last().unwrap().edge_count(), 2 * n - 4);
        assert!(r.joins.iter().all(|j| j.support >= r.support_threshold));

        let s = species(n, 0.05, 1.0, 500 + seed);
        let mut d = reconstruct_from_distortions(&distorted(&s, genes, seed), &DistortionParams::default()).unwrap();
        assert!(d.check_against(s.tree()), "seed={seed} {:?}", d.failure);
    }
}

#[test]
fn reports_are_deterministic() {
    let s = species(12, 0.2, 0.5, 77);
    let c = contracted(&s, 60, 77);
    let a = serde_json::to_string(&reconstruct_from_contractions(&c, &ContractionParams::default()).unwrap()).unwrap();
    let b = serde_json::to_string(&reconstruct_from_contractions(&c, &ContractionParams::default()).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn cherry_sets_are_recovered() {
    let n = 16;
    let mut hits = 0;
    for seed in 0..50u64 {
        let s = species(n, 0.05, 0.5, 900 + seed);
        let truth = s.tree().to_unrooted();
        let mut expected = Vec::new();
        for a in 1..=n as u32 {
            for b in a + 1..=n as u32 {
                if truth.leaf_distance(a, b).unwrap() == 2 {
                    expected.push((a, b));
                }
            }
        }
        let r = reconstruct_from_contractions(&contracted(&s, 200, seed), &ContractionParams::default()).unwrap();
        hits += usize::from(r.cherries == expected);
    }
    assert!(hits >= 48, "{hits}/50");
}
