//! Simulation and analysis of fluorescence-detected electron paramagnetic
//! resonance with a Purcell-enhanced superconducting resonator and a
//! single-microwave-photon counter.

// `!(x > 0.0)` is used on purpose so that NaN fails validation too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bath;
pub mod bloch;
pub mod constants;
pub mod counter;
pub mod error;
pub mod fit;
pub mod fluorescence;
pub mod resonator;
pub mod recipe;
pub mod species;

pub use error::{Error, Result};
