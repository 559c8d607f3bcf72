//! Experiment driver for the `romdot-core` reduced-order DOT models:
//! configuration, synthetic phantoms and data, file formats, and the
//! subcommands behind the `romdot` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
mod error;
pub mod experiment;
pub mod formats;
pub mod phantom;
pub mod threads;

pub use error::AppError;
