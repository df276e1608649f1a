//! Coupled runs on the swapped pair of complete binary trees.

use hgt_phylo::hgt::simulate_gene;
use hgt_phylo::impossibility::{build_pair, coupled_run_indexed, coupling_config, describe, replay, replay_back};

#[test]
fn replaying_back_reproduces_the_t_side() {
    let p = build_pair(6, 4.0).unwrap();
    for i in 0..100 {
        let r = coupled_run_indexed(&p, 21, i).unwrap();
        let back = replay_back(&p, &r).unwrap();
        assert!(back.cleaned().tree.leafsomorphic(&r.sample.tree.cleaned().tree), "run {i}");
        // Descriptors survive a round trip through T-bar.
        let events = replay(&p.t_bar, &r.descriptors).unwrap();
        assert_eq!(describe(&p.t_bar, &events), r.descriptors);
    }
}

// Runs with no in-move are rare once there are many events, so the
// condition is exercised at moderate rates.
#[test]
fn qualifying_runs_give_identical_outputs() {
    let mut qualifying = 0;
    for lambda in [1.0, 2.0] {
        let p = build_pair(6, lambda).unwrap();
        for i in 0..500 {
            let r = coupled_run_indexed(&p, 3, i).unwrap();
            let d = &r.diagnostics;
            assert_eq!(d.identical, r.topology.same_topology(&r.topology_bar));
            if d.qualifies() {
                qualifying += 1;
                assert!(d.identical, "lambda {lambda} run {i}");
            }
        }
    }
    assert!(qualifying >= 20, "{qualifying}");
}

#[test]
fn t_side_marginal_matches_plain_simulation() {
    let p = build_pair(9, 2.0).unwrap();
    for i in 0..20 {
        let r = coupled_run_indexed(&p, 5, i).unwrap();
        assert_eq!(r.sample, simulate_gene(&p.t, &coupling_config(), 5, i).unwrap());
    }
}
