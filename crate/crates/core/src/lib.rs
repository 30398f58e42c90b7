// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod data_io;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod inference;
pub mod jiou;
pub mod spatial;

pub use error::{Error, Result};
