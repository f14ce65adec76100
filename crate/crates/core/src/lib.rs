//! Ensemble offline model-based optimization.
//!
//! Designs are optimized by gradient ascent against an ensemble of learned
//! proxies, with the per-model gradients combined by one of several rules
//! (see [`combine::Combiner`]). Synthetic tasks with exact oracles, a training
//! pipeline for the proxies, and an experiment harness are included.

pub mod ascent;
pub mod combine;
pub mod dataset;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod nn;
pub mod space;
pub mod tasks;

pub use error::{Error, Result};
