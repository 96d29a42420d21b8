//! Random-walk convolutional networks for graph learning.
//!
//! The crate samples random walks on graphs ([`walker`]), turns each walk
//! into a feature matrix that records node and edge features together with
//! the identity and adjacency relations inside a sliding window
//! ([`walkfeat`]), and runs a 1D CNN over those matrices whose outputs are
//! pooled back into the nodes ([`model`]). Training and evaluation live in
//! [`trainer`]; [`expressiveness`] computes exact distributions of walk
//! feature matrices to compare what the architecture can tell apart.

pub mod error;
pub mod expressiveness;
pub mod graph;
pub mod model;
pub mod nn;
pub mod rng;
pub mod stats;
pub mod trainer;
pub mod walker;
pub mod walkfeat;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    struct Introduction;
    #[doc = include_str!("../../../book/src/graphs.md")]
    struct Graphs;
    #[doc = include_str!("../../../book/src/walks.md")]
    struct Walks;
    #[doc = include_str!("../../../book/src/features.md")]
    struct Features;
    #[doc = include_str!("../../../book/src/model.md")]
    struct Model;
    #[doc = include_str!("../../../book/src/training.md")]
    struct Training;
    #[doc = include_str!("../../../book/src/expressiveness.md")]
    struct Expressiveness;
    #[doc = include_str!("../../../book/src/cli.md")]
    struct Cli;
}
