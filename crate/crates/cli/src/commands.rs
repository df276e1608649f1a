//! One function per subcommand. Each writes its artifacts and a manifest
//! into the output directory and returns whether it produced a failure
//! report.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::Context;
use hgt_phylo::diluted::{embedded_tree, Host, Matcher};
use hgt_phylo::hgt::simulate_batch;
use hgt_phylo::impossibility::{indistinguishability_sweep, sweep_csv};
use hgt_phylo::observation::ContractedGeneTree;
use hgt_phylo::{Distorted, Phylogeny, RootedTree, UnrootedTree, Weighted};
use serde::Serialize;
use serde_json::json;

use crate::config::{Pipeline, RunConfig};
use crate::trial::{self, TrialSeeds};

pub const DEFAULT_HS: [u32; 3] = [6, 9, 12];
pub const DEFAULT_LAMBDAS: [f64; 5] = [1.0, 2.0, 4.0, 8.0, 16.0];
pub const DEFAULT_COUPLING_TRIALS: usize = 200;

/// Nonzero exit status for runs whose report records a failure.
pub const FAILURE_EXIT: u8 = 2;

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    library_version: &'static str,
    command: &'a str,
    seed: u64,
    config: &'a RunConfig,
    args: serde_json::Value,
    outputs: Vec<String>,
}

struct Artifacts<'a> {
    cfg: &'a RunConfig,
    written: Vec<String>,
}

impl<'a> Artifacts<'a> {
    fn new(cfg: &'a RunConfig) -> anyhow::Result<Self> {
        fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
        Ok(Artifacts { cfg, written: Vec::new() })
    }

    fn write(&mut self, name: &str, contents: &str) -> anyhow::Result<()> {
        let p = self.cfg.out.join(name);
        fs::write(&p, contents).with_context(|| format!("writing {}", p.display()))?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> anyhow::Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.write(name, &s)
    }

    fn finish(mut self, command: &str, args: serde_json::Value) -> anyhow::Result<()> {
        let outputs = std::mem::take(&mut self.written);
        let m = Manifest {
            tool: "hgt-phylo",
            version: env!("CARGO_PKG_VERSION"),
            library_version: hgt_phylo::VERSION,
            command,
            seed: self.cfg.seed,
            config: self.cfg,
            args,
            outputs,
        };
        self.json("manifest.json", &m)
    }
}

/// Newick given inline (ends in `;`) or as a file path.
fn newick_arg(s: &str) -> anyhow::Result<String> {
    if s.trim_end().ends_with(';') {
        return Ok(s.trim().to_string());
    }
    let text = fs::read_to_string(s).with_context(|| format!("reading {s}"))?;
    Ok(text.trim().to_string())
}

/// Non-blank lines of a file of Newick trees.
fn newick_lines(path: &Path) -> anyhow::Result<Vec<String>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect())
}

fn lines(trees: impl IntoIterator<Item = String>) -> String {
    trees.into_iter().fold(String::new(), |mut s, t| {
        s.push_str(&t);
        s.push('\n');
        s
    })
}

pub fn simulate(cfg: &RunConfig, species: Option<&Path>) -> anyhow::Result<bool> {
    let seeds = TrialSeeds::new(cfg.seed, 0);
    let s = match species {
        Some(p) => Phylogeny::from_newick(&newick_arg(&p.to_string_lossy())?)?,
        None => trial::species(cfg, seeds.species)?,
    };
    let genes = simulate_batch(&s, cfg.genes(), seeds.genes, &cfg.sim_config())?;
    let mut csv = String::from("gene,recipient_edge,recipient_offset,donor_edge,donor_offset,time\n");
    for r in genes.iter().flat_map(|g| g.event_records()) {
        writeln!(
            csv,
            "{},{},{},{},{},{}",
            r.gene_index,
            r.recipient_edge.index(),
            r.recipient_offset,
            r.donor_edge.index(),
            r.donor_offset,
            r.time
        )?;
    }
    let mut a = Artifacts::new(cfg)?;
    a.write("species.nwk", &format!("{}\n", s.to_newick()))?;
    a.write("genes.nwk", &lines(genes.iter().map(|g| g.tree.cleaned().to_newick())))?;
    a.write("events.csv", &csv)?;
    a.finish("simulate", json!({ "species": species }))?;
    eprintln!(
        "simulated {} genes on {} leaves, {} transfers",
        genes.len(),
        s.leaf_count(),
        genes.iter().map(|g| g.events.len()).sum::<usize>()
    );
    Ok(false)
}

pub fn observe(cfg: &RunConfig, input: &Path) -> anyhow::Result<bool> {
    let genes: Vec<Weighted> =
        newick_lines(input)?.iter().map(|l| Weighted::from_newick(l)).collect::<Result<_, _>>()?;
    let noise = TrialSeeds::new(cfg.seed, 0).noise;
    let text = match cfg.pipeline {
        Pipeline::Contraction => lines(trial::contract_trees(cfg, &genes, noise)?.iter().map(|c| c.to_newick())),
        Pipeline::Distortion => lines(trial::distort_trees(cfg, &genes, noise)?.iter().map(|d| d.to_newick())),
    };
    let mut a = Artifacts::new(cfg)?;
    a.write("observations.nwk", &text)?;
    a.finish("observe", json!({ "input": input, "epsilon": cfg.epsilon() }))?;
    Ok(false)
}

pub fn reconstruct(cfg: &RunConfig, input: &Path, truth: Option<&Path>) -> anyhow::Result<bool> {
    let trees = newick_lines(input)?;
    let truth = truth.map(|p| newick_arg(&p.to_string_lossy())).transpose()?;
    let mut a = Artifacts::new(cfg)?;
    let (failed, newick) = match cfg.pipeline {
        Pipeline::Contraction => {
            let obs: Vec<ContractedGeneTree> = trees
                .iter()
                .enumerate()
                .map(|(i, l)| Ok(ContractedGeneTree { topology: UnrootedTree::from_newick(l)?, gene_index: i }))
                .collect::<hgt_phylo::Result<_>>()?;
            let mut r = trial::contraction_report(&obs)?;
            if let Some(t) = &truth {
                r.check_against(&RootedTree::from_newick(t)?.to_unrooted());
            }
            a.json("report.json", &r)?;
            (r.failure.is_some(), r.newick)
        }
        Pipeline::Distortion => {
            let obs: Vec<Distorted> = trees
                .iter()
                .enumerate()
                .map(|(i, l)| Distorted::new(Weighted::from_newick(l)?, i))
                .collect::<hgt_phylo::Result<_>>()?;
            let mut r = trial::distortion_report(cfg, &obs)?;
            if let Some(t) = &truth {
                r.check_against(&RootedTree::from_newick(t)?);
            }
            a.json("report.json", &r)?;
            (r.failure.is_some(), r.newick)
        }
    };
    if let Some(t) = &newick {
        a.write("tree.nwk", &format!("{t}\n"))?;
        println!("{t}");
    }
    a.finish("reconstruct", json!({ "input": input, "truth": truth, "epsilon": cfg.epsilon() }))?;
    Ok(failed)
}

pub fn pipeline(cfg: &RunConfig) -> anyhow::Result<bool> {
    let summary = trial::run_pipeline(cfg)?;
    let mut a = Artifacts::new(cfg)?;
    a.json("pipeline.json", &summary)?;
    a.finish("pipeline", json!({}))?;
    println!(
        "{:?}: {}/{} trials recovered the species tree (rate {})",
        summary.pipeline, summary.successes, summary.trials, summary.success_rate
    );
    Ok(false)
}

pub fn diluted(cfg: &RunConfig, pattern: &str, host: &str, unrooted: bool) -> anyhow::Result<bool> {
    let pattern = RootedTree::from_newick(&newick_arg(pattern)?)?;
    let host_text = newick_arg(host)?;
    let h = if unrooted {
        Host::unrooted(&UnrootedTree::from_newick(&host_text)?)
    } else {
        Host::rooted(&RootedTree::from_newick(&host_text)?)
    };
    let mut m = Matcher::new(&h);
    let table = m.table(pattern.forest(), pattern.root());
    let roots = m.roots(pattern.forest(), pattern.root());
    let scan = m.unique(pattern.forest(), pattern.root());
    let embedded = (!roots.is_empty()).then(|| {
        let e = m.embedding(pattern.root(), 0);
        embedded_tree(&h, &e).to_newick()
    });
    let report = json!({
        "unrooted": unrooted,
        "roots": roots,
        "scan": scan,
        "embedded": embedded,
        "table": table,
    });
    let mut a = Artifacts::new(cfg)?;
    a.json("diluted.json", &report)?;
    a.finish("diluted", json!({ "pattern": pattern.to_newick(), "host": host_text, "unrooted": unrooted }))?;
    println!("{}", embedded.unwrap_or_else(|| "no diluted embedding".into()));
    Ok(false)
}

pub fn coupling(cfg: &RunConfig, hs: &[u32], lambdas: &[f64]) -> anyhow::Result<bool> {
    let trials = cfg.trials.unwrap_or(DEFAULT_COUPLING_TRIALS);
    let rows = indistinguishability_sweep(hs, lambdas, trials, cfg.seed)?;
    let csv = sweep_csv(&rows);
    let mut a = Artifacts::new(cfg)?;
    a.write("coupling.csv", &csv)?;
    a.finish("coupling", json!({ "H": hs, "lambda": lambdas, "trials": trials }))?;
    print!("{csv}");
    Ok(false)
}

