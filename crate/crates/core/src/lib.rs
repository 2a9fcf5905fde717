//! Achievable-rate toolkit for the three-node multiple access channel with
//! feedback and correlated sources.
//!
//! The crate evaluates the decode-forward and compress-forward transmissibility
//! conditions for a given channel and source pair, searches over auxiliary
//! distributions, eliminates rate variables exactly with Fourier-Motzkin, and
//! simulates the underlying random codes at small block lengths.

pub mod error;
pub mod fmt;
pub mod model;
pub mod optimizer;
pub mod prob;
pub mod random;
pub mod regions;
pub mod rng;
pub mod simulator;

pub use error::{Error, Result};
