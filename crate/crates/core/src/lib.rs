//! Unsupervised discovery of transition structure in sequences of verbs
//! annotated with aspectual category and tense.
//!
//! The pipeline encodes each pair of successive verbs of a sentence as a
//! vector, summarizes the vectors with a self-organizing map, models the
//! order of map units with Markov chains and HMMs, clusters the map
//! prototypes (choosing the cluster count by the Davies-Bouldin index) and
//! interprets the clusters against independent annotations.

pub mod analysis;
pub mod cli;
pub mod clusterer;
pub mod config;
pub mod corpus;
pub mod markov;
pub mod pipeline;
pub mod rng;
pub mod som;
pub mod synth;
