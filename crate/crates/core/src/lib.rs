//! Covariate shift detection for dense classifiers.
//!
//! A sample's activation graph at a dense layer weights each edge `i -> j` by
//! `W(j, i) * x(i)`. MAGDiff features measure, for every class, the distance
//! between that graph and the class-mean graph; coordinate-wise two-sample KS
//! tests with a Bonferroni correction then decide whether two sets of inputs
//! come from the same distribution.

pub mod actgraph;
pub mod error;
pub mod experiment;
pub mod features;
pub mod io;
pub mod nn;
pub mod rng;
pub mod shifts;
pub mod stats;

pub use actgraph::{mean_graph_summaries, ActivationGraph, MeanGraphSummary, NormKind};
pub use error::{Error, Result};
pub use features::{extract_features, FeatureKind, FeatureMatrix};
pub use nn::{Activation, LabeledSet, Network, Tensor};
pub use stats::{bonferroni_test, estimate_power, ks_two_sample, PowerMode, TestOutcome};
