//! Gene trees under horizontal gene transfer and species-tree reconstruction
//! from contracted or distorted gene trees.
//!
//! Continuous quantities are generic over [`Scalar`]; the aliases below fix
//! the scalar to `f64` (or `f32`).

// `!(x >= 0)` is used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod diluted;
pub mod error;
pub mod hgt;
pub mod impossibility;
pub mod newick;
pub mod num;
pub mod observation;
pub mod reconstruct;
pub mod tree;

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use error::{Error, Result};
pub use num::{lower_median, Scalar};
pub use tree::{
    random_phylogeny, BoundedRates, Forest, Label, NodeId, RootedTree, Shape, UnrootedTree,
    Violation,
};

pub type Phylogeny = tree::SpeciesPhylogeny<f64>;
pub type Phylogeny32 = tree::SpeciesPhylogeny<f32>;
pub type Rates = tree::BoundedRates<f64>;
pub type Weighted = tree::WeightedTree<f64>;
pub type Gene = hgt::GeneTree<f64>;
pub type Sample = hgt::GeneSample<f64>;
pub type Distorted = observation::DistortedGeneTree<f64>;
pub type Distorted32 = observation::DistortedGeneTree<f32>;
