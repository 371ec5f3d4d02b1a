//! Community detection for weighted, directed multigraphs based on flow
//! compression, with transition rates regularized by an empirical Bayes
//! prior so that sparse or undersampled networks do not produce spurious
//! modules.
//!
//! The pipeline is: ingest a [`graph::MultiGraph`], build a
//! [`prior::PriorModel`] (uniform, bipartite, or metadata connectivity),
//! compute stationary visit rates with [`flow::stationary_flow`], minimize
//! the two-level codelength with [`search::optimize`], and score results
//! with [`mapeq`] and [`metrics`]. The [`bench`] module drives the
//! link-removal and cross-validation experiments.

pub mod bench;
pub mod error;
pub mod flow;
pub mod graph;
pub mod mapeq;
pub mod metrics;
pub mod prior;
pub mod search;

pub use error::{Error, Result};
