//! Recurrent networks with learned, input-independent exponential decay for
//! irregularly sampled series and marked event streams.
// `!(x > 0.0)` is used on purpose so NaN lands in the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cell;
pub mod cli;
pub mod data;
pub mod decay;
pub mod error;
pub mod eval;
pub mod heads;
pub mod model;
pub mod numerics;
pub mod parallel;
pub mod training;

pub use error::{ErrorCategory, GruweError, Result};
