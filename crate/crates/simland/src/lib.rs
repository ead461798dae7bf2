//! simland: supervised learning from arbitrary similarity functions.
//!
//! The similarity K(x, y) may be indefinite; nothing here asks for positive
//! semi-definiteness. Learning proceeds by landmarking: sample d reference
//! points, represent every x by its vector of similarities to them, and fit
//! constrained linear predictors in that space.
//!
//! - [`similarity`]: built-in and precomputed similarity functions.
//! - [`embedding`]: landmark sampling and the embedding map.
//! - [`loss`]: epsilon-insensitive, smoothed, margin, and squared losses.
//! - [`regression`]: dense L2-ball regression (RegLand).
//! - [`sparse`]: greedy L1-ball sparse regression (RegLand-Sp).
//! - [`ordinal`]: margin-threshold ordinal regression (ORLand).
//! - [`ranking`]: NDCG machinery and the squared-surrogate ranker.
//! - [`baseline`]: the kernel regression baseline.
//! - [`data`]: CSV ingestion, preprocessing, splits, seeded randomness.
//! - [`mod@bench`]: the benchmark harness behind the CLI.
//! - [`pipeline`]: self-contained single-model train/predict/eval.

// `!(x > 0.0)` in validations deliberately rejects NaN along with
// non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod bench;
pub mod data;
pub mod embedding;
pub mod error;
pub mod loss;
mod optim;
pub mod ordinal;
pub mod pipeline;
pub mod ranking;
pub mod regression;
pub mod similarity;
pub mod sparse;

pub use error::{Error, Result};
pub use optim::SolverParams;
