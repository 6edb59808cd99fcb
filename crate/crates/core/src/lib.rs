//! Numerical laboratory for the Steen/Ermakov–Pinney superposition, the
//! monodromy invariants of the one-dimensional Dirac (AKNS) equation and an
//! integrable nonlinear deformation built from its fundamental solution.
//!
//! Every construction is checked by residual norms against independent
//! oracles. The [`scenario`] module strings the checks together into
//! machine-readable [`report::RunReport`]s; the `steenlab` binary exposes it
//! on the command line.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod deform;
pub mod dirac;
pub mod error;
pub mod numkit;
pub mod potentials;
pub mod report;
pub mod scenario;
pub mod steen;
pub mod traces;

pub use error::{Error, Result};
pub use num_complex::Complex64;
