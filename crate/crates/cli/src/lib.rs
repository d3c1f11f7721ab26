//! Command-line front end for the hybridsim model: JSON scenario configs in,
//! CSV tables plus a digest manifest out.

// `!(x > 0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod golden;
pub mod output;
pub mod runner;
