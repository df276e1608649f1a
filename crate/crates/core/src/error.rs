use thiserror::Error;

use crate::tree::{Label, NodeId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown leaf label {0}")]
    UnknownLabel(Label),

    #[error("unknown vertex {0:?}")]
    UnknownNode(NodeId),

    #[error("empty leaf subset")]
    EmptySubset,

    #[error("newick parse error at byte {offset}: {message}")]
    Newick { offset: usize, message: String },

    #[error("invalid tree: {0}")]
    InvalidTree(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no feasible ultrametric edge times after {attempts} attempts")]
    Infeasible { attempts: usize },

    #[error("no gene-tree edge covers {what} on species edge {edge:?} at offset {offset}")]
    Uncovered {
        what: &'static str,
        edge: NodeId,
        offset: f64,
    },

    #[error("tree is not binary at {0:?}")]
    NotBinary(NodeId),

    #[error("subtree is not rooted at the host root")]
    NotRootShared,

    #[error("brute-force oracle limited to {limit} leaves, got {got}")]
    OracleTooLarge { limit: usize, got: usize },

    #[error("observations disagree on the leaf set")]
    InconsistentLeafSets,

    #[error("leaf {0} claimed by two cherries")]
    ConflictingCherries(Label),

    #[error("transfer cannot be replayed: {0}")]
    NotReplayable(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
