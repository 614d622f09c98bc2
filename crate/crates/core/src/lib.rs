//! Decentralized consensus optimization with Newton tracking.
//!
//! Every node `i` of a connected network owns a local objective `f_i` and the
//! nodes cooperate, talking only to their neighbours, to find the minimizer of
//! `f_1 + ... + f_n`. The crate is split along the pipeline an experiment
//! follows:
//!
//! - [`topology`]: communication graphs, Metropolis mixing matrices and the
//!   spectrum of `I - W`.
//! - [`objectives`]: local objectives (regularized logistic regression,
//!   quadratics) with gradients, Hessians and curvature bounds.
//! - [`algorithms`]: Newton tracking in its three equivalent forms, gradient
//!   tracking, EXTRA, DLM and a centralized reference solver.
//! - [`analysis`]: the linear-rate certificate, G-norm errors, KKT residuals and
//!   trajectory checks.
//! - [`harness`]: run configuration, presets, orchestration and CSV export.

// NaN must fail parameter checks, so `!(x > 0.0)` is deliberate
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algorithms;
pub mod analysis;
pub mod error;
pub mod harness;
pub mod objectives;
pub mod topology;

pub use error::{Error, Result};
