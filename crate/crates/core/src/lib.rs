//! Five-level hybrid intrusion detector over six flow statistics.
//!
//! Layer 1 is a k-nearest-neighbour DoS detector, layer 2 an extreme learning
//! machine for Probe traffic, and layers 3-5 hierarchical ELMs (stacked
//! ℓ1-sparse autoencoders with an ELM head) for U2R, R2L and a final
//! attack/normal check. A flow is labelled by the first layer that votes
//! positive; flows caught only by the last layer are reported as Unknown.

pub mod api;
pub mod cascade;
pub mod config;
pub mod dataset;
pub mod elm;
pub mod error;
pub mod helm;
pub mod knn;
pub mod linalg;
pub mod metrics;
pub mod ops;
pub mod rng;
pub mod synth;

pub use cascade::{CascadeModel, Decision, Prediction};
pub use config::RunConfig;
pub use dataset::{Category, FlowRecord, Taxonomy};
pub use error::{Error, Result};
