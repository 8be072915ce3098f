//! Evaluation, classification, and sampling machinery for multidimensional
//! polynomial Euler products and the infinitely divisible distributions
//! they generate.

pub mod arith;
pub mod catalog;
pub mod classify;
pub mod cli;
pub mod error;
pub mod levy;
pub mod product;
pub mod sampler;
pub mod util;
pub mod witness;

pub use error::{Error, Result};
