//! Trees of predictors for survival prediction at fixed horizons.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod cohort;
pub mod error;
pub mod learners;
pub mod service;
pub mod tree;

pub use error::{Error, Result};
