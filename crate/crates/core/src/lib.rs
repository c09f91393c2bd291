//! Detecting distribution shifts in LLM-generated text.
//!
//! Corpora of generated items are annotated with text features, and two
//! corpora are compared feature by feature with two-sample Kolmogorov-Smirnov
//! tests, combined with Bonferroni or Fisher control.

pub mod config;
pub mod corpus;
pub mod detect;
pub mod error;
pub mod features;
pub mod mixture;
pub mod sampler;
pub mod stats;
pub mod synthetic;

pub use error::{Error, Result};
