//! Reproducible experiments on top of `hgt_phylo`: configuration, trial
//! running and artifact writing for the `hgt-phylo` binary.

// `!(x >= 0)` is used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod trial;

pub use config::{Overrides, Pipeline, Policy, RunConfig};
pub use trial::{run_pipeline, run_trial, PipelineSummary, TrialResult, TrialSeeds};
