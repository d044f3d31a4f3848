//! Sparse Bayesian DOA tracking for uniform linear arrays with mutual coupling.
//!
//! The crate provides the coupled array model, a relevance vector machine
//! whose prior is centred on a predicted signal, a Kalman tracker driven by
//! it, a spike-and-slab Gibbs sampler, DOA extraction, and a Monte-Carlo
//! harness that compares them.

// `!(x > 0.0)` guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod array_model;
pub mod bcskf;
pub mod doa;
pub mod error;
pub mod gibbs;
pub mod harness;
pub mod linalg;
pub mod rvm;

pub use error::{Error, Result};
