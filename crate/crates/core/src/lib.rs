//! Reward fine-tuning of small conditional rectified-flow generators with
//! group-relative and tracker-baseline policy gradients.
//!
//! The crate is organised bottom-up: [`nn`] (MLP, manual backprop, Adam),
//! [`flow`] and [`policy`] (velocity field and flow-matching pretraining),
//! [`sde`] (ODE/SDE samplers with per-step log-densities), [`rewards`],
//! [`rl`] (advantages, trackers, allocation, objective, training loop) and
//! [`harness`] (runs, comparisons, reports).

// `!(x > 0.0)` checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod checkpoint;
pub mod config;
pub mod error;
pub mod exec;
pub mod flow;
pub mod harness;
pub mod nn;
pub mod plot;
pub mod policy;
pub mod rewards;
pub mod rl;
pub mod rng;
pub mod sde;
pub mod stats;

pub use config::{RunConfig, Variant};
pub use error::{Error, Result};
pub use exec::Execution;
