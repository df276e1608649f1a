//! Matcher against the exhaustive oracle on small random instances. Hosts
//! are gene trees grown under heavy transfer, so most of them disagree with
//! the pattern somewhere.

use hgt_phylo::diluted::oracle::{
    brute_force_oracle, brute_force_oracle_unrooted, diluted_by_filtering, diluted_shapes, diluted_subtrees,
};
use hgt_phylo::diluted::{embedded_tree, is_diluted_subtree, Host, Matcher, Scan};
use hgt_phylo::hgt::{simulate_gene, SimConfig};
use hgt_phylo::observation::{contract, ContractionPolicy};
use hgt_phylo::{random_phylogeny, NodeId, Phylogeny, Rates, RootedTree};
use proptest::prelude::*;

fn instance(n: usize, lambda: f64, seed: u64) -> (Phylogeny, hgt_phylo::Gene) {
    let params = Rates { lambda_bar: lambda, ..Rates::default() };
    let s = random_phylogeny(n, &params, seed).unwrap();
    let g = simulate_gene(&s, &SimConfig::default(), seed ^ 0x5eed, 0).unwrap().tree;
    (s, g)
}

fn pattern(s: &Phylogeny, pick: usize) -> RootedTree {
    let t = s.tree();
    let internal: Vec<NodeId> = t.preorder_all().into_iter().filter(|&v| !t.is_leaf(v)).collect();
    t.forest().extract(internal[pick % internal.len()])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn rooted_matcher_agrees_with_oracle(n in 4usize..=10, lambda in 0.0f64..0.6, seed in any::<u64>(), pick in any::<usize>()) {
        let (s, g) = instance(n, lambda, seed);
        let t = pattern(&s, pick);
        let obs = g.cleaned().tree;
        let oracle = brute_force_oracle(&t, &obs).unwrap();
        prop_assert!(oracle.roots.len() <= 1, "several roots {:?}", oracle.roots);

        let host = Host::rooted(&obs);
        let mut m = Matcher::new(&host);
        let found = m.matches(&t, t.root()).to_vec();
        prop_assert_eq!(found.is_empty(), oracle.roots.is_empty());
        if let Some(first) = found.first() {
            prop_assert!(oracle.roots.contains(&first.node));
            let e = m.embedding(t.root(), 0);
            let sub = embedded_tree(&host, &e);
            prop_assert!(diluted_shapes(&t).unwrap().contains(&sub.shape()));
            prop_assert!(sub.nodes().filter(|&v| sub.is_leaf(v)).all(|v| sub.label(v).is_some()));
        }
    }

    #[test]
    fn unrooted_matcher_agrees_with_oracle(n in 4usize..=9, lambda in 0.0f64..0.6, eps in 0.0f64..0.4, seed in any::<u64>(), pick in any::<usize>()) {
        let (s, g) = instance(n, lambda, seed);
        let t = pattern(&s, pick);
        let obs = contract(&g, eps, ContractionPolicy::All, 0).unwrap().topology;
        let oracle = brute_force_oracle_unrooted(&t, &obs).unwrap();

        let host = Host::unrooted(&obs);
        let mut m = Matcher::new(&host);
        let roots: std::collections::BTreeSet<NodeId> = m.roots(&t, t.root()).into_iter().collect();
        prop_assert_eq!(&roots, &oracle.roots);
        match m.unique(&t, t.root()) {
            Scan::Unique(e) => {
                let sub = embedded_tree(&host, &e);
                prop_assert!(diluted_shapes(&t).unwrap().contains(&sub.shape()));
            }
            Scan::Ambiguous(r) => prop_assert!(r.len() > 1),
            Scan::None => prop_assert!(oracle.roots.is_empty()),
        }
    }

    #[test]
    fn drop_enumeration_matches_predicate(n in 2usize..=9, seed in any::<u64>()) {
        let s = random_phylogeny::<f64>(n, &Rates::default(), seed).unwrap();
        let t = s.tree();
        let mut a = diluted_subtrees(t).unwrap();
        let mut b = diluted_by_filtering(t).unwrap();
        a.sort();
        b.sort();
        prop_assert_eq!(&a, &b);
        for m in &a {
            prop_assert!(is_diluted_subtree(t, m).unwrap());
        }
    }

    #[test]
    fn diluted_subtrees_share_two_disjoint_paths(n in 2usize..=11, seed in any::<u64>()) {
        let s = random_phylogeny::<f64>(n, &Rates::default(), seed).unwrap();
        let t = s.tree();
        let masks = diluted_subtrees(t).unwrap();
        let root = t.root();
        let sides: Vec<Vec<NodeId>> = t.children(root).iter().map(|&c| t.forest().preorder(c)).collect();
        for a in &masks {
            for b in &masks {
                let both = |v: &NodeId| t.is_leaf(*v) && a[v.index()] && b[v.index()];
                prop_assert!(sides.iter().all(|side| side.iter().any(both)));
            }
        }
    }
}

#[test]
fn full_gene_tree_of_an_hgt_free_species_embeds_at_the_root() {
    for seed in 0..20 {
        let (s, g) = instance(10, 0.0, seed);
        let obs = g.cleaned().tree;
        let host = Host::rooted(&obs);
        let mut m = Matcher::new(&host);
        let t = s.tree();
        assert_eq!(m.roots(t, t.root()), vec![obs.root()]);
        // Every kept checkpoint drops one great-grandchild when it can.
        let e = m.embedding(t.root(), 0);
        assert!(e.nodes.len() < obs.len());
    }
}

