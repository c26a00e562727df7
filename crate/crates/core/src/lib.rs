//! Federated meta-learning for coordinate-based neural fields.
//!
//! The crate is organised bottom-up:
//!
//! - [`nn`]: a small dense engine for sinusoidal MLPs with exact gradients,
//!   Hessian-vector products, clipping and optimizers.
//! - [`data`]: signals, coordinate grids, Dirichlet partitioning and
//!   support/query splits.
//! - [`meta`]: client-side local meta-optimization (MAML, FOMAML, Reptile,
//!   meta-NSGD and the privacy-preserving outer step).
//! - [`server`]: client sampling, aggregation rules and the round loop.
//! - [`metrics`]: PSNR/SSIM and their privacy counterparts.
//! - [`theory`]: numerical checks of the meta-gradient and loss-change
//!   approximations on controlled toy problems.
//! - [`harness`]: configuration, experiments, test-time optimization and
//!   checkpoints.

// `!(x > 0.0)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod harness;
pub mod meta;
pub mod metrics;
pub mod nn;
pub mod rng;
pub mod server;
pub mod theory;

pub use error::{Error, Result};
