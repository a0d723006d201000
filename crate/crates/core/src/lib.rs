//! Group-sparse low-rank restoration of grayscale images.
//!
//! Similar patches are stacked into group matrices whose singular values are
//! shrunk either uniformly (nuclear-norm minimization) or with adaptive,
//! non-descending weights (weighted nuclear-norm minimization). The
//! [`dictionary`] module expresses the same shrinkage as sparse coding over a
//! per-group rank-one dictionary, which the [`verify`] suites use as an
//! independent check.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dictionary;
pub mod error;
pub mod grouping;
pub mod image;
pub mod io;
pub mod lowrank;
pub mod metrics;
pub mod random;
pub mod restore;
pub mod sparse;
pub mod verify;

pub use error::{Error, Result};
pub use image::{ImageBuffer, MaskBuffer};
pub use restore::{denoise, inpaint, RestoreParams, RestoreReport, Solver, StopRule};
