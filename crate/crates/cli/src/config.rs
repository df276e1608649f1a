//! Run configuration: JSON file, command-line overrides, seed fallback and
//! sanity warnings.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use hgt_phylo::hgt::{RateModel, SimConfig};
use hgt_phylo::observation::ContractionPolicy;
use hgt_phylo::Rates;
use serde::{Deserialize, Serialize};

pub const SEED_VAR: &str = "HGT_PHYLO_SEED";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Pipeline {
    #[default]
    Contraction,
    Distortion,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    #[default]
    All,
    None,
    Random,
}

/// Everything that determines the output of a run. `out` and `threads` do
/// not, and are left out of manifests.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub n: usize,
    pub seed: u64,
    pub lambda_bar: f64,
    pub rho_lambda: f64,
    pub tau_bar: f64,
    pub rho_tau: f64,
    pub mu_bar: f64,
    pub rho_mu: f64,
    /// Derived from the rate bounds when absent.
    pub epsilon: Option<f64>,
    /// `ceil(50 log2 n)` when absent.
    pub genes: Option<usize>,
    /// Depth stop of the distortion pipeline; the graph pipeline always
    /// works at distance 2.
    pub d0: Option<f64>,
    pub policy: Policy,
    /// Contraction probability under the random policy.
    pub policy_p: f64,
    pub pipeline: Pipeline,
    pub trials: Option<usize>,
    #[serde(skip)]
    pub out: PathBuf,
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let r = Rates::default();
        RunConfig {
            n: 16,
            seed: 0,
            lambda_bar: r.lambda_bar,
            rho_lambda: r.rho_lambda,
            tau_bar: r.tau_bar,
            rho_tau: r.rho_tau,
            mu_bar: r.mu_bar,
            rho_mu: r.rho_mu,
            epsilon: None,
            genes: None,
            d0: None,
            policy: Policy::All,
            policy_p: 0.5,
            pipeline: Pipeline::Contraction,
            trials: None,
            out: PathBuf::from("out"),
            threads: None,
        }
    }
}

/// Values given on the command line; `None` means "not given".
#[derive(Clone, Debug, Default, clap::Args)]
pub struct Overrides {
    /// JSON file with any RunConfig fields; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Number of leaves [default: 16]
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Master seed [default: $HGT_PHYLO_SEED, else 0]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Largest transfer rate [default: 0.05]
    #[arg(long, global = true)]
    pub lambda_bar: Option<f64>,
    /// Smallest transfer rate as a fraction of lambda-bar [default: 1]
    #[arg(long, global = true)]
    pub rho_lambda: Option<f64>,
    /// Largest edge time [default: 1]
    #[arg(long, global = true)]
    pub tau_bar: Option<f64>,
    /// Smallest edge time as a fraction of tau-bar [default: 0.1]
    #[arg(long, global = true)]
    pub rho_tau: Option<f64>,
    /// Largest substitution rate; also the constant rate of the distortion pipeline [default: 1]
    #[arg(long, global = true)]
    pub mu_bar: Option<f64>,
    /// Smallest substitution rate as a fraction of mu-bar [default: 0.5]
    #[arg(long, global = true)]
    pub rho_mu: Option<f64>,
    /// Observation error [default: 0.5 tau_min mu_min for contraction, 0.1 mu-bar tau_min for distortion]
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    /// Genes per species tree [default: ceil(50 log2 n)]
    #[arg(long, global = true)]
    pub genes: Option<usize>,
    /// Depth stop for the distortion pipeline [default: none, build the full tree]
    #[arg(long, global = true)]
    pub d0: Option<f64>,
    /// Which short edges get contracted [default: all]
    #[arg(long, global = true, value_enum)]
    pub policy: Option<Policy>,
    /// Contraction probability for --policy random [default: 0.5]
    #[arg(long, global = true)]
    pub policy_p: Option<f64>,
    /// Observation model and reconstruction [default: contraction]
    #[arg(long, global = true, value_enum)]
    pub pipeline: Option<Pipeline>,
    /// Independent trials [default: 10 for pipeline, 200 for coupling]
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    /// Output directory [default: out]
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads [default: available cores]
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

macro_rules! apply {
    ($cfg:ident, $o:ident, $($f:ident),*) => {
        $(if let Some(v) = $o.$f.clone() { $cfg.$f = v; })*
    };
}

impl RunConfig {
    pub fn from_file(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Defaults, then the config file, then flags. The seed falls back to
    /// `env_seed` only when neither file nor flags set it.
    pub fn resolve(o: &Overrides, env_seed: Option<&str>) -> anyhow::Result<Self> {
        let (mut cfg, file_seed) = match &o.config {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                let raw: serde_json::Value =
                    serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
                let has_seed = raw.get("seed").is_some();
                let cfg: RunConfig = serde_json::from_value(raw).with_context(|| format!("parsing {}", p.display()))?;
                (cfg, has_seed)
            }
            None => (RunConfig::default(), false),
        };
        if !file_seed {
            if let Some(s) = env_seed {
                cfg.seed = s.trim().parse().with_context(|| format!("{SEED_VAR}={s:?} is not a seed"))?;
            }
        }
        apply!(cfg, o, n, seed, lambda_bar, rho_lambda, tau_bar, rho_tau, mu_bar, rho_mu, policy, policy_p, pipeline, out);
        if o.epsilon.is_some() {
            cfg.epsilon = o.epsilon;
        }
        if o.genes.is_some() {
            cfg.genes = o.genes;
        }
        if o.d0.is_some() {
            cfg.d0 = o.d0;
        }
        if o.trials.is_some() {
            cfg.trials = o.trials;
        }
        if o.threads.is_some() {
            cfg.threads = o.threads;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.n < 2 {
            bail!("n must be at least 2");
        }
        self.rates().check()?;
        if self.genes == Some(0) {
            bail!("genes must be at least 1");
        }
        if self.trials == Some(0) {
            bail!("trials must be at least 1");
        }
        if self.epsilon.is_some_and(|e| !(e >= 0.0)) {
            bail!("epsilon must be nonnegative");
        }
        if self.d0.is_some_and(|d| !(d > 0.0)) {
            bail!("d0 must be positive");
        }
        if !(0.0..=1.0).contains(&self.policy_p) {
            bail!("policy-p must lie in [0, 1]");
        }
        if self.threads == Some(0) {
            bail!("threads must be at least 1");
        }
        Ok(())
    }

    pub fn rates(&self) -> Rates {
        Rates {
            lambda_bar: self.lambda_bar,
            rho_lambda: self.rho_lambda,
            tau_bar: self.tau_bar,
            rho_tau: self.rho_tau,
            mu_bar: self.mu_bar,
            rho_mu: self.rho_mu,
        }
    }

    pub fn genes(&self) -> usize {
        self.genes.unwrap_or_else(|| default_genes(self.n))
    }

    pub fn epsilon(&self) -> f64 {
        let r = self.rates();
        self.epsilon.unwrap_or(match self.pipeline {
            Pipeline::Contraction => 0.5 * r.tau_min() * r.mu_min(),
            Pipeline::Distortion => 0.1 * self.mu_bar * r.tau_min(),
        })
    }

    /// Substitution rates used when simulating genes: the species rates
    /// for contractions, the constant `mu_bar` for distortions.
    pub fn sim_config(&self) -> SimConfig<f64> {
        let rates = match self.pipeline {
            Pipeline::Contraction => RateModel::Species,
            Pipeline::Distortion => RateModel::Constant(self.mu_bar),
        };
        SimConfig { rates, ..SimConfig::default() }
    }

    /// `seed` is the per-gene seed stream used by the random policy.
    pub fn contraction_policy(&self, seed: u64) -> ContractionPolicy {
        match self.policy {
            Policy::All => ContractionPolicy::All,
            Policy::None => ContractionPolicy::None,
            Policy::Random => ContractionPolicy::Random { p: self.policy_p, seed },
        }
    }

    /// Hypotheses of the recovery guarantees that this config breaks.
    pub fn warnings(&self) -> Vec<String> {
        let r = self.rates();
        let eps = self.epsilon();
        let mut out = Vec::new();
        match self.pipeline {
            Pipeline::Contraction => {
                let bound = r.tau_min() * r.mu_min();
                if eps >= bound {
                    out.push(format!("epsilon {eps} is not below tau_min * mu_min = {bound}; true edges may be contracted"));
                }
                if self.d0.is_some_and(|d| d != 2.0) {
                    out.push("the contraction pipeline always joins at distance 2; d0 is ignored".into());
                }
            }
            Pipeline::Distortion => {
                let bound = self.mu_bar * r.tau_min() / 2.0;
                if eps >= bound {
                    out.push(format!("epsilon {eps} is not below mu * tau_min / 2 = {bound}; merges may go wrong"));
                }
            }
        }
        out
    }
}

pub fn default_genes(n: usize) -> usize {
    (50.0 * (n as f64).log2()).ceil().max(1.0) as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_and_env_is_a_fallback() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"n": 20, "lambda_bar": 0.1}"#).unwrap();
        let o = Overrides { config: Some(p.clone()), lambda_bar: Some(0.2), ..Overrides::default() };
        let c = RunConfig::resolve(&o, Some("42")).unwrap();
        assert_eq!((c.n, c.lambda_bar, c.seed), (20, 0.2, 42));

        std::fs::write(&p, r#"{"seed": 7}"#).unwrap();
        assert_eq!(RunConfig::resolve(&o, Some("42")).unwrap().seed, 7);
        let o = Overrides { seed: Some(3), ..o };
        assert_eq!(RunConfig::resolve(&o, Some("42")).unwrap().seed, 3);
    }

    #[test]
    fn rejects_bad_input() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"nn": 20}"#).unwrap();
        let o = Overrides { config: Some(p), ..Overrides::default() };
        assert!(RunConfig::resolve(&o, None).is_err());
        let o = Overrides { rho_tau: Some(0.0), ..Overrides::default() };
        assert!(RunConfig::resolve(&o, None).is_err());
        assert!(RunConfig::resolve(&Overrides::default(), Some("x")).is_err());
    }

    #[test]
    fn derived_defaults_and_warnings() {
        let c = RunConfig::default();
        assert_eq!(c.genes(), 200);
        assert!((c.epsilon() - 0.025).abs() < 1e-12);
        assert!(c.warnings().is_empty());
        let d = RunConfig { pipeline: Pipeline::Distortion, ..RunConfig::default() };
        assert!((d.epsilon() - 0.01).abs() < 1e-12);
        let bad = RunConfig { epsilon: Some(0.06), ..RunConfig::default() };
        assert_eq!(bad.warnings().len(), 1);
        let bad = RunConfig { pipeline: Pipeline::Distortion, epsilon: Some(0.05), ..RunConfig::default() };
        assert_eq!(bad.warnings().len(), 1);
    }
}
