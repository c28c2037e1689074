//! Decentralized opportunistic spectrum access as a multi-player bandit.
//!
//! The crate bundles a deterministic time-slotted channel simulator, the
//! trekking policies for static ([`tsn`]) and dynamic ([`tdn`]) networks,
//! comparison baselines, the phase-duration formulas that drive them, and an
//! experiment harness that writes per-run traces and aggregate curves.
//!
//! Channels and ranks are 0-based throughout the API. Trace CSV files and
//! replay fixtures use 1-based channel numbers.

pub mod baselines;
pub mod channel;
pub mod config;
pub mod durations;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod policy;
pub mod replay;
pub mod tdn;
pub mod trace_io;
pub mod tsn;

pub use error::{Error, Result};
