//! Ranking of multi-candidate abstractive summaries by the consensus
//! importance of their summary content units (SCUs).
//!
//! Each candidate is decomposed into SCUs, all SCUs of a document are
//! embedded and clustered with HDBSCAN, every SCU scores the size of its
//! cluster, and candidates are ordered by their length-penalized total.
//! The [`metrics`] and [`analysis`] modules hold the evaluation tooling:
//! rank correlations, Krippendorff's alpha, ROUGE, extractive coverage and
//! density, run-to-run stability and the length-penalty scan.

pub mod analysis;
pub mod cache;
pub mod clustering;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod extraction;
mod http;
pub mod matrix;
pub mod metrics;
pub mod scoring;
pub mod text;

pub use error::{Error, Result};
pub use http::RetryPolicy;
