//! Patent portfolio pruning engine.
//!
//! The pipeline ingests patent records, scores each one on 32 valuation
//! parameters, ranks them with a LambdaMART model under a strategic
//! weighting profile, matches the top of the ranking against a knowledge
//! graph of documented market needs, and emits per-cluster opportunity
//! reports. Three human review gates sit between the stages.
//!
//! Numeric kernels ([`params`] formulas, [`ltr`]) are generic over the
//! [`Scalar`] trait so they can be run in `f32` or `f64`; the aliases
//! below fix the precision used by the pipeline.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod claims;
pub mod corpus;
pub mod gates;
pub mod needgraph;
pub mod nexus;
pub mod params;
pub mod scalar;
pub mod service;
pub mod strata;
pub mod text;

pub mod ltr;

pub use scalar::Scalar;

/// Feature vector in pipeline precision.
pub type FeatureVector = params::FeatureVector<f64>;
/// Ranker in pipeline precision.
pub type RankerModel = ltr::RankerModel<f64>;
/// Single-precision ranker, useful for memory-constrained scoring.
pub type RankerModelF32 = ltr::RankerModel<f32>;
/// Regression tree in pipeline precision.
pub type RegressionTree = ltr::RegressionTree<f64>;
/// Training set in pipeline precision.
pub type TrainingSet = ltr::TrainingSet<f64>;
