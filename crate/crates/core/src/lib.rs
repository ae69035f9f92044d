//! Learned evaluation metrics for generated text.
//!
//! Neural features of a (reference, candidate) pair are combined by a small
//! trained regressor, calibrated against the reference's self-score, and
//! benchmarked against human judgments alongside BLEU and ROUGE-L.

pub mod aggregator;
pub mod baseline;
pub mod cli;
pub mod correlation;
pub mod error;
pub mod ingestion;
pub mod model;
pub mod pipeline;
pub mod report;
pub mod synthetic;

pub use error::{Error, Result};
