//! Policy optimization for stochastic optimal control with Markov-embedded
//! uncertainty, plus LQR/MPC baselines and a closed-loop evaluation harness.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod baselines;
pub mod cli;
pub mod config;
pub mod diff;
pub mod error;
pub mod evaluation;
pub mod ipm;
pub mod policy;
pub mod process_model;
pub mod rollout;

pub use error::{Error, Result};
