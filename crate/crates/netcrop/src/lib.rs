//! netcrop: model selection for network data by cross-validation on
//! overlapping subnetwork partitions.
//!
//! The core idea: split the nodes into a shared overlap plus disjoint parts,
//! fit each candidate model on every overlap+part subnetwork, stitch the fits
//! through the overlap (label matching for communities, orthogonal alignment
//! for embeddings), predict the held-out between-part blocks, and pick the
//! candidate with the smallest prediction loss, majority-voted over repeated
//! random splits.

pub mod alignment;
pub mod engine;
pub mod error;
pub mod generators;
pub mod graph;
pub mod latent;
pub mod spectral;

pub use engine::{
    majority_vote, plan_parameters, select_blockmodel, select_latent_dim, select_rdpg_dim,
    total_loss, tune_rsc, CandidateModel, CvConfig, Loss, SelectionReport,
};
pub use error::{NetcropError, Result};
pub use graph::{AdjacencyMatrix, DensePairBlock, NodeSubset};
