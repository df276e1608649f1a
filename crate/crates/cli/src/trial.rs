//! End-to-end trials: random species tree, simulated genes, observations,
//! reconstruction and comparison with the truth.

use hgt_phylo::hgt::{gene_rng, simulate_batch};
use hgt_phylo::observation::{contract, contract_weighted, distort, distort_weighted, ContractedGeneTree};
use hgt_phylo::reconstruct::{
    reconstruct_from_contractions, reconstruct_from_distortions, ContractionParams, ContractionReport,
    DistortionParams, DistortionReport,
};
use hgt_phylo::{random_phylogeny, Distorted, Phylogeny, Sample, Weighted};
use rand::RngCore;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Pipeline, RunConfig};

/// Seeds of one trial, drawn from stream `trial` of the master seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct TrialSeeds {
    pub species: u64,
    pub genes: u64,
    /// Distortion noise and random contraction.
    pub noise: u64,
}

impl TrialSeeds {
    pub fn new(seed: u64, trial: usize) -> Self {
        let mut rng = gene_rng(seed, trial);
        TrialSeeds { species: rng.next_u64(), genes: rng.next_u64(), noise: rng.next_u64() }
    }
}

/// Random species tree of the config. Distortion runs use the constant
/// rate `mu_bar` on every edge.
pub fn species(cfg: &RunConfig, seed: u64) -> anyhow::Result<Phylogeny> {
    let s = random_phylogeny(cfg.n, &cfg.rates(), seed)?;
    Ok(match cfg.pipeline {
        Pipeline::Contraction => s,
        Pipeline::Distortion => {
            let k = s.tree().len();
            s.with_subst_rates(vec![cfg.mu_bar; k])?
        }
    })
}

pub fn contract_samples(cfg: &RunConfig, genes: &[Sample], noise: u64) -> anyhow::Result<Vec<ContractedGeneTree>> {
    let eps = cfg.epsilon();
    let policy = cfg.contraction_policy(noise);
    Ok(genes
        .par_iter()
        .map(|g| contract(&g.tree, eps, policy, g.gene_index))
        .collect::<Result<_, _>>()?)
}

pub fn distort_samples(cfg: &RunConfig, genes: &[Sample], noise: u64) -> anyhow::Result<Vec<Distorted>> {
    let eps = cfg.epsilon();
    Ok(genes
        .par_iter()
        .map(|g| distort(&g.tree, eps, noise, g.gene_index))
        .collect::<Result<_, _>>()?)
}

/// Same as [`contract_samples`] on trees read back from Newick.
pub fn contract_trees(cfg: &RunConfig, genes: &[Weighted], noise: u64) -> anyhow::Result<Vec<ContractedGeneTree>> {
    let eps = cfg.epsilon();
    let policy = cfg.contraction_policy(noise);
    Ok(genes
        .par_iter()
        .enumerate()
        .map(|(i, g)| contract_weighted(g, eps, policy, i))
        .collect::<Result<_, _>>()?)
}

pub fn distort_trees(cfg: &RunConfig, genes: &[Weighted], noise: u64) -> anyhow::Result<Vec<Distorted>> {
    let eps = cfg.epsilon();
    Ok(genes
        .par_iter()
        .enumerate()
        .map(|(i, g)| distort_weighted(g, eps, noise, i))
        .collect::<Result<_, _>>()?)
}

pub fn contraction_report(obs: &[ContractedGeneTree]) -> anyhow::Result<ContractionReport> {
    Ok(reconstruct_from_contractions(obs, &ContractionParams::default())?)
}

pub fn distortion_report(cfg: &RunConfig, obs: &[Distorted]) -> anyhow::Result<DistortionReport> {
    let params = DistortionParams { depth: cfg.d0, epsilon: cfg.epsilon(), min_support: None };
    Ok(reconstruct_from_distortions(obs, &params)?)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialResult {
    pub trial: usize,
    pub seeds: TrialSeeds,
    pub species: String,
    pub events: usize,
    pub success: bool,
    pub failure: Option<String>,
    pub newick: Option<String>,
    pub support_threshold: usize,
    /// Joins or merges performed.
    pub steps: usize,
    /// Truncation violations, for distortion runs with a depth stop.
    pub violations: Vec<String>,
}

pub fn run_trial(cfg: &RunConfig, trial: usize) -> anyhow::Result<TrialResult> {
    let seeds = TrialSeeds::new(cfg.seed, trial);
    let s = species(cfg, seeds.species)?;
    let samples = simulate_batch(&s, cfg.genes(), seeds.genes, &cfg.sim_config())?;
    let events = samples.iter().map(|g| g.events.len()).sum();
    let mut violations = Vec::new();
    let (success, failure, newick, support_threshold, steps) = match cfg.pipeline {
        Pipeline::Contraction => {
            let mut r = contraction_report(&contract_samples(cfg, &samples, seeds.noise)?)?;
            let ok = r.check_against(&s.tree().to_unrooted());
            (ok, r.failure.map(|f| f.reason), r.newick, r.support_threshold, r.joins.len())
        }
        Pipeline::Distortion => {
            let mut r = distortion_report(cfg, &distort_samples(cfg, &samples, seeds.noise)?)?;
            let ok = match cfg.d0 {
                Some(d0) => {
                    violations = r.truncation.violations(&s, d0, cfg.epsilon());
                    r.failure.is_none() && violations.is_empty()
                }
                None => r.check_against(s.tree()),
            };
            (ok, r.failure.map(|f| f.reason), r.newick, r.support_threshold, r.merges.len())
        }
    };
    Ok(TrialResult {
        trial,
        seeds,
        species: s.to_newick(),
        events,
        success,
        failure,
        newick,
        support_threshold,
        steps,
        violations,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PipelineSummary {
    pub pipeline: Pipeline,
    pub n: usize,
    pub genes: usize,
    pub epsilon: f64,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub results: Vec<TrialResult>,
}

pub const DEFAULT_TRIALS: usize = 10;

/// Runs the trials in parallel; results come back in trial order.
pub fn run_pipeline(cfg: &RunConfig) -> anyhow::Result<PipelineSummary> {
    let trials = cfg.trials.unwrap_or(DEFAULT_TRIALS);
    let results: Vec<TrialResult> = (0..trials)
        .into_par_iter()
        .map(|t| run_trial(cfg, t))
        .collect::<anyhow::Result<_>>()?;
    let successes = results.iter().filter(|r| r.success).count();
    Ok(PipelineSummary {
        pipeline: cfg.pipeline,
        n: cfg.n,
        genes: cfg.genes(),
        epsilon: cfg.epsilon(),
        trials,
        successes,
        success_rate: successes as f64 / trials as f64,
        results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trial_seeds_differ() {
        let a = TrialSeeds::new(1, 0);
        assert_ne!(a, TrialSeeds::new(1, 1));
        assert_ne!(a.genes, a.noise);
        assert_eq!(a, TrialSeeds::new(1, 0));
    }

    #[test]
    fn transfer_free_trials_succeed() {
        for pipeline in [Pipeline::Contraction, Pipeline::Distortion] {
            let cfg = RunConfig { n: 12, lambda_bar: 0.0, genes: Some(1), trials: Some(4), pipeline, ..RunConfig::default() };
            let s = run_pipeline(&cfg).unwrap();
            assert_eq!(s.successes, 4, "{pipeline:?}");
            assert_eq!(s.results.iter().map(|r| r.events).sum::<usize>(), 0);
        }
    }

    #[test]
    fn depth_stop_gives_a_truncation() {
        let cfg = RunConfig {
            n: 12,
            lambda_bar: 0.02,
            genes: Some(40),
            d0: Some(0.5),
            pipeline: Pipeline::Distortion,
            ..RunConfig::default()
        };
        let r = run_trial(&cfg, 0).unwrap();
        assert!(r.success, "{:?}", r.violations);
        assert!(r.newick.is_none() || r.steps == 11);
    }
}
