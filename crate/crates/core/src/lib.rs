//! Pool-based active learning.
//!
//! The crate is split along the pieces of the pool-based protocol:
//!
//! - [`nn`]: the classifier (dense ReLU network with dropout) and its
//!   probability, embedding and input-gradient outputs.
//! - [`data`]: datasets, preprocessing and the [`data::Pool`] holding the
//!   labeled pool, unlabeled pool and test set.
//! - [`strategies`]: query strategies that rank unlabeled examples and pick
//!   a batch of `n`.
//! - [`harness`]: the query → label → retrain → evaluate loop, multi-seed
//!   comparison and learning-curve export.

pub mod data;
pub mod error;
pub mod harness;
pub mod nn;
pub mod strategies;

pub use error::{Error, Result};
