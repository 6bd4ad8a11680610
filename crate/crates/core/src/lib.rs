//! Patient-specific pathway graphs from transcriptomic data.
//!
//! The crate turns a gene-expression matrix plus a cached pathway knowledge
//! base (GPML documents and a gene→pathway index) into one interaction graph
//! per sample, attaches two-channel node features, and exports a graph-level
//! classification dataset. Alongside the pipeline it provides random-graph
//! controls, 4-node graphlet orbit counting, and classification metrics for
//! scoring trainer output.

pub mod assembly;
pub mod config;
pub mod error;
pub mod expression;
pub mod geneid;
pub mod gpml;
pub mod graph;
pub mod graphlets;
pub mod metrics;
pub mod nullmodels;
pub mod pathway;
pub mod pipeline;
pub mod util;

pub use error::{Error, ErrorCategory};
pub use graph::{merge_graphs, restrict_to_genes, strip_self_loops, GeneSymbol, MolecularGraph};
