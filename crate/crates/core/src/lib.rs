//! Wind farm layout optimization with polynomial-chaos AEP estimation and a
//! Kriging surrogate driven by a genetic algorithm.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod farm_model;
pub mod kriging;
pub mod optimizer;
pub mod pce;
pub mod wind_resource;

pub use error::{Error, Result};
