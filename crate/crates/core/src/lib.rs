//! Robustness workbench for neural-assisted mobile network configuration.
//!
//! The pipeline: collect a grid dataset from the built-in discrete-event
//! simulator ([`netsim`], [`dataset`]), train a performance-efficiency
//! predictor ([`mlp`]) that drives randomized action search ([`policy`]),
//! attack the policy's state observations with GP-UCB Bayesian optimization
//! ([`gpr`], [`attacker`]), then retrain and switch to probabilistic
//! selection ([`defense`]). [`pipeline`] chains the stages and writes the
//! CSV outputs.

// Negated comparisons such as `!(x > 0.0)` deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attacker;
pub mod config;
pub mod dataset;
pub mod defense;
pub mod domain;
pub mod error;
pub mod gpr;
pub mod linalg;
pub mod mlp;
pub mod par;
pub mod pipeline;
pub mod policy;
pub mod report;
pub mod seed;
pub mod netsim;

pub use error::{Error, Result};
