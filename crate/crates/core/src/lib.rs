//! Simulation of blind source separation for two photonic mixtures sampled
//! by a sparse optical pulse train.
//!
//! The pipeline: [`signalgen`] builds a signal of interest and band-limited
//! interference, [`mixer`] combines them, [`sampler`] gates both mixtures
//! with a pulse train, [`detector`] optionally adds the photodetector
//! response, and [`bss`] learns a 2×2 demixer from moment curves of the
//! samples. [`metrics`] and [`harness`] score and drive scenarios.

pub mod bss;
pub mod detector;
pub mod error;
pub mod export;
pub mod harness;
pub mod mat2;
pub mod metrics;
pub mod mixer;
pub mod rng;
pub mod sampler;
pub mod signal;
pub mod signalgen;

pub use error::{Error, Result};
