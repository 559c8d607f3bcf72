//! Reduced-order forward models for 2D diffuse optical tomography.
//!
//! The zero-frequency transfer function of the finite-difference diffusion
//! model is rewritten over the symmetric positive definite Schur complement
//! of its interior block. A one-sided global projection basis for that
//! operator is grown on the fly by inner-outer Krylov recycling while the
//! first few full-order systems of an inversion are solved, and the resulting
//! reduced model then drives a trust-region Gauss-Newton reconstruction of a
//! parametric level-set absorption image.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, configuration and
//! the command line live in the `romdot` companion crate.

#![cfg_attr(not(test), no_std)]
// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod basis;
pub mod discretization;
mod error;
pub mod inversion;
pub mod krylov;
pub mod linalg;
pub mod pals;
pub mod rom;

pub use error::{Error, Result};
