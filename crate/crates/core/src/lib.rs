//! Memory-bounded full-graph GNN training over a growing sequence of spanning
//! subgraphs.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is pure
//! computation: graph structure and propagation matrices, quality-aware edge
//! samplers, the epoch scheduler that grows the spanning subgraph under an
//! edge-ratio cap, a small full-batch GNN engine with hand-written
//! backpropagation, and diagnostics for gradient noise and estimator variance.
//! File formats, synthetic data and the CLI live in the `spangraph` crate.
//!
//! # Features
//!
//! - `std`: implements `std::error::Error` for the error types.
//! - `parallel`: row-parallel sparse-dense products through rayon (implies
//!   `std`). Results are bit-identical to the sequential path.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod dense;
pub mod diagnostics;
pub mod error;
pub mod gnn;
pub mod graph;
pub mod propagation;
pub mod rng;
pub mod sampler;
pub mod scheduler;
pub mod train;

#[doc(inline)]
pub use self::{
    dense::Matrix,
    error::{Error, Result},
    gnn::{GnnModel, LayerType},
    graph::{Dataset, EdgeId, Graph, NodeId, SpanningSubgraph, Split},
    propagation::{PropagationKind, PropagationMatrix},
    sampler::{EdgeProbabilities, SampleRequest, SamplerKind},
    scheduler::{EpochState, ScheduleConfig},
};
