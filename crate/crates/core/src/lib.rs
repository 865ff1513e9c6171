//! Dynamic load balancing on adversarially chosen, randomly perturbed graphs.
//!
//! Loads live on `n` nodes whose connecting graph changes every round. An
//! adversary picks each graph, an optional smoothing step flips a random
//! handful of potential edges, and a local protocol moves load along the
//! edges of the result. All load arithmetic is exact.

pub mod adversary;
pub mod algorithms;
pub mod config;
pub mod dyadic;
pub mod engine;
pub mod graph;
pub mod load;
pub mod metrics;
pub mod output;
pub mod parallel;
pub mod rng;
pub mod smoothing;
pub mod verify;
