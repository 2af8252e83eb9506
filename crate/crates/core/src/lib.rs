//! Differentially private federated Thompson sampling with distributed
//! exploration (DP-FTS-DE).
//!
//! `N` agents each run Thompson sampling over a Gaussian-process surrogate
//! approximated with shared random Fourier features. Every round each agent
//! sends a sampled feature-weight vector to a central server, which runs a
//! subsampled Gaussian mechanism over them: Bernoulli subsampling, per-vector
//! clipping, a weighted average per sub-region of the domain and calibrated
//! Gaussian noise. A moments accountant tracks the cumulative privacy loss.
//!
//! Module map:
//!
//! * [`domain`] discrete grids, equal-volume sub-regions, agent assignment
//! * [`surrogate`] SE kernel, random Fourier features, GP and feature posteriors
//! * [`mechanism`] the server-side subsampled Gaussian mechanism
//! * [`accountant`] moments accountant and privacy ledger
//! * [`weights`] adaptive softmax sub-region weights
//! * [`protocol`] agent and server round logic, run traces
//! * [`objectives`] synthetic and file-backed objective suites
//! * [`experiments`] configuration, algorithm presets, sweeps, output files

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod accountant;
pub mod domain;
mod error;
pub mod experiments;
pub mod mechanism;
pub mod objectives;
pub mod protocol;
pub mod rng;
pub mod surrogate;
pub mod weights;

pub use error::{Error, Result};
