//! Saliency-ranked object proposals.
//!
//! Edge segments are scored with a Bayesian saliency model, classified as
//! object or background by a pairwise CRF, and the surviving salient edges
//! vote for sliding windows whose scores are normalized by the square root of
//! the window area.

pub mod bayes;
pub mod crf;
pub mod edges;
pub mod evalkit;
pub mod features;
pub mod filters;
pub mod imagio;
pub mod pipeline;
pub mod proposals;
pub mod registry;
