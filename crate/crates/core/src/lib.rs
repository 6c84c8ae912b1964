//! Achievable secret-key rates for NV-center quantum-repeater schemes.
//!
//! Models four proposed repeater assessment experiments (SiSQuaRe, single
//! photon, SPADS, SPOTL) with closed-form photonics and memory-decoherence
//! channels, computes BB84 / six-state key rates, compares them against
//! repeaterless bounds, and sizes certification experiments.

pub mod benchmarks;
pub mod error;
pub mod keyrate;
pub mod mc;
pub mod memory;
pub mod optimizer;
pub mod photonics;
pub mod schemes;
pub mod single_photon;
pub mod state;
pub mod stats;

pub use error::{Error, Result};
