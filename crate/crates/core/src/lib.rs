// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod harness;
pub mod mittag_leffler;
pub mod operators;
pub mod output;
pub mod quadrature;
pub mod solver;
pub mod special;
pub mod spectral;

pub use error::{Error, Result};
