//! LPD-GCN: graph classification with dense-connected, context-aware graph
//! convolutions, an auxiliary node-label reconstruction objective and
//! attention-weighted aggregation of layer-wise readouts.
//!
//! The crate is self-contained: it ships its own small reverse-mode
//! differentiation engine ([`tensor`]), the building blocks and optimizer
//! ([`nn`]), the model and its GIN baseline ([`model`]), TU-format dataset
//! handling ([`graph`]) and the cross-validation experiment harness
//! ([`harness`]).
//!
//! Independent folds and sweep points are spread over a rayon pool when the
//! `parallel` feature is enabled (the default); otherwise they run one after
//! another with identical results.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod graph;
pub mod harness;
pub mod model;
pub mod nn;
pub mod parallel;
pub mod real;
pub mod tensor;

pub use error::{Error, Result};
pub use real::Real;
