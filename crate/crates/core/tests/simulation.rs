//! Statistical and structural checks of the transfer simulator and the two
//! observation models.

use hgt_phylo::hgt::{simulate_batch, simulate_gene, DonorPolicy, SimConfig};
use hgt_phylo::observation::{contract, distort, metric_deviation, ContractionPolicy};
use hgt_phylo::{random_phylogeny, Rates};
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Poisson};

#[test]
fn event_counts_are_poisson() {
    let params = Rates { lambda_bar: 0.2, ..Rates::default() };
    let s = random_phylogeny(16, &params, 11).unwrap();
    let genes = 3000;
    let cfg = SimConfig { donor_policy: DonorPolicy::IncludeRecipient, ..SimConfig::default() };
    let batch = simulate_batch(&s, genes, 5, &cfg).unwrap();
    let total: usize = batch.iter().map(|g| g.events.len()).sum();
    let expected = s.total_hgt_weight();
    let mean = total as f64 / genes as f64;
    assert!((mean - expected).abs() < 0.04 * expected, "mean {mean} vs {expected}");

    // Pool the per-gene counts on the longest edge into bins 0..=k.
    let e = s.edges().max_by(|a, b| s.time(*a).partial_cmp(&s.time(*b)).unwrap()).unwrap();
    let m = s.hgt_rate(e) * s.time(e);
    let pois = Poisson::new(m).unwrap();
    let k = 3;
    let mut observed = vec![0f64; k + 1];
    for g in &batch {
        let c = g.events.iter().filter(|x| x.recipient.edge == e).count();
        observed[c.min(k)] += 1.0;
    }
    let mut stat = 0.0;
    for (i, &o) in observed.iter().enumerate() {
        let p = if i < k { pois.pmf(i as u64) } else { 1.0 - (0..k).map(|j| pois.pmf(j as u64)).sum::<f64>() };
        let ex = p * genes as f64;
        stat += (o - ex).powi(2) / ex;
    }
    let p_value = 1.0 - ChiSquared::new(k as f64).unwrap().cdf(stat);
    assert!(p_value > 0.01, "chi-square {stat}, p {p_value}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn no_transfer_contraction_is_the_species_topology(n in 3usize..40, seed in any::<u64>()) {
        let s = random_phylogeny(n, &Rates { lambda_bar: 0.0, ..Rates::default() }, seed).unwrap();
        let g = simulate_gene(&s, &SimConfig::default(), seed, 0).unwrap();
        prop_assert!(g.events.is_empty());
        let eps = 0.5 * s.min_time() * s.min_subst_rate();
        let c = contract(&g.tree, eps, ContractionPolicy::All, 0).unwrap();
        prop_assert!(c.topology.same_topology(&s.tree().to_unrooted()));
    }

    #[test]
    fn larger_epsilon_only_removes_splits(n in 4usize..30, seed in any::<u64>(), e1 in 0.0f64..0.6, e2 in 0.0f64..0.6) {
        let s = random_phylogeny(n, &Rates { lambda_bar: 0.3, ..Rates::default() }, seed).unwrap();
        let g = simulate_gene(&s, &SimConfig::default(), seed, 1).unwrap();
        let (lo, hi) = (e1.min(e2), e1.max(e2));
        let a = contract(&g.tree, lo, ContractionPolicy::All, 1).unwrap().topology.splits();
        let b = contract(&g.tree, hi, ContractionPolicy::All, 1).unwrap().topology.splits();
        prop_assert!(b.is_subset(&a));
        let none = contract(&g.tree, hi, ContractionPolicy::None, 1).unwrap().topology.splits();
        prop_assert!(a.is_subset(&none));
        prop_assert_eq!(contract(&g.tree, lo, ContractionPolicy::All, 1).unwrap().topology.labels().len(), n);
    }

    #[test]
    fn distortion_stays_within_epsilon(n in 3usize..30, seed in any::<u64>(), eps in 0.0f64..0.2) {
        let s = random_phylogeny(n, &Rates { lambda_bar: 0.3, ..Rates::default() }, seed).unwrap();
        let g = simulate_gene(&s, &SimConfig::default(), seed, 2).unwrap();
        let d = distort(&g.tree, eps, seed, 2).unwrap();
        prop_assert!(metric_deviation(&g.tree.cleaned(), &d).unwrap() <= eps + 1e-9);
        prop_assert!(d.tree.tree.leafsomorphic(&g.tree.cleaned().tree));
    }
}
