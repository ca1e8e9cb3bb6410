// `!(x > 0.0)` is the NaN-rejecting comparison throughout
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod estimators;
pub mod kernels;
pub mod mixture;
pub mod selectors;
pub mod sim;
pub mod special;

pub use error::{Error, Result};
