//! Distributional soft actor-critic with twin Gaussian value distributions,
//! expected-value substitution and variance-based critic gradient
//! adjustment, plus DSACv1 and SAC baselines, small control tasks and
//! ground-truth oracles.
//!
//! Everything runs in `f64` on the CPU and is deterministic per seed.

pub mod actor;
pub mod critic;
pub mod distributions;
pub mod env;
pub mod error;
pub mod harness;
pub mod numerics;
pub mod oracles;
pub mod replay;
pub mod rng;
pub mod variants;

pub use error::{Error, Result};
