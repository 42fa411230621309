//! Synthesis and auditing of temporally balanced temporal-grounding
//! benchmarks: annotation generation from commonsense activity graphs,
//! multi-level temporal bias measurement, debiasing filters, distribution-
//! shift splits, and grounding evaluation with robustness reporting.

pub mod catalog;
pub mod config;
pub mod dataset;
pub mod debias;
pub mod error;
pub mod eval;
pub mod graph;
pub mod language;
pub mod manifest;
pub mod manuscript;
pub mod metrics;
pub mod pipeline;
pub mod scalar;
pub mod seeding;
pub mod trace;

pub use error::{Error, Result};
pub use scalar::Real;

/// Scalar type used throughout the pipeline and IO layers.
pub type Scalar = f64;
