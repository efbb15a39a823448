//! Differentially private, justifiably fair synthetic data for discrete tables.
//!
//! The pipeline has three private stages:
//!
//! 1. noisy 1-way marginals ([`marginals`], [`dp`]),
//! 2. selection of a fairness-constrained spanning tree over the attributes
//!    ([`selection`], checked by [`graph`]),
//! 3. noisy 2-way marginals on the tree edges and ancestral sampling
//!    ([`sampler`]).
//!
//! [`pipeline`] wires the stages together, [`metrics`] evaluates the output
//! and [`hardness`] turns the 3-SAT reduction for the underlying optimisation
//! problem into an executable instance generator.
//!
//! Data-parallel loops run on rayon when the `parallel` feature is enabled
//! (the default); see [`par::Exec`].

pub mod dataset;
pub mod dp;
pub mod error;
pub mod graph;
pub mod hardness;
pub mod marginals;
pub mod metrics;
pub mod par;
pub mod pipeline;
pub mod rng;
pub mod sampler;
pub mod selection;
pub mod selftest;
pub mod sources;

pub use error::{Error, Result};
