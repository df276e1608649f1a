use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hgt_phylo_cli::commands::{self, DEFAULT_HS, DEFAULT_LAMBDAS, FAILURE_EXIT};
use hgt_phylo_cli::config::{Overrides, RunConfig, SEED_VAR};

/// Gene trees under horizontal gene transfer, and species-tree recovery
/// from contracted or distorted gene trees.
///
/// Every run writes its artifacts and a manifest.json (config, seed,
/// versions) into --out. Outputs depend only on the config, never on
/// --threads.
#[derive(Parser)]
#[command(name = "hgt-phylo", version)]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate gene trees: species.nwk, genes.nwk, events.csv
    Simulate {
        /// Species tree (Newick with lengths and [&lambda=..,mu=..]) instead of a random one
        #[arg(long)]
        species: Option<PathBuf>,
    },
    /// Contract or distort gene trees: observations.nwk
    Observe {
        /// File of weighted gene trees, one Newick per line
        #[arg(long)]
        input: PathBuf,
    },
    /// Rebuild the species tree from observations: tree.nwk, report.json
    Reconstruct {
        /// File of observed gene trees, one Newick per line
        #[arg(long)]
        input: PathBuf,
        /// True species tree, for the matches_truth field
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// End-to-end trials with success statistics: pipeline.json
    Pipeline,
    /// Diluted-subtree DP of a pattern against a host: diluted.json
    Diluted {
        /// Pattern tree, Newick text or file
        #[arg(long)]
        pattern: String,
        /// Host tree, Newick text or file
        #[arg(long)]
        host: String,
        /// Treat the host as unrooted and scan every vertex
        #[arg(long)]
        unrooted: bool,
    },
    /// Coupling sweep on the swapped complete binary trees: coupling.csv
    Coupling {
        /// Tree heights, multiples of 3
        #[arg(long = "H", value_delimiter = ',', default_values_t = DEFAULT_HS)]
        h: Vec<u32>,
        /// Transfer rates inside the swapped subtrees
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_LAMBDAS)]
        lambda: Vec<f64>,
    },
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let env_seed = std::env::var(SEED_VAR).ok();
    let cfg = RunConfig::resolve(&cli.overrides, env_seed.as_deref())?;
    if let Some(t) = cfg.threads {
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    if !matches!(cli.command, Command::Coupling { .. } | Command::Diluted { .. }) {
        for w in cfg.warnings() {
            eprintln!("warning: {w}");
        }
    }
    match cli.command {
        Command::Simulate { species } => commands::simulate(&cfg, species.as_deref()),
        Command::Observe { input } => commands::observe(&cfg, &input),
        Command::Reconstruct { input, truth } => commands::reconstruct(&cfg, &input, truth.as_deref()),
        Command::Pipeline => commands::pipeline(&cfg),
        Command::Diluted { pattern, host, unrooted } => commands::diluted(&cfg, &pattern, &host, unrooted),
        Command::Coupling { h, lambda } => commands::coupling(&cfg, &h, &lambda),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => {
            eprintln!("failure reported, see the report in the output directory");
            ExitCode::from(FAILURE_EXIT)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
