//! Numerical core for lock-in CW-ODMR diamond magnetometry.
//!
//! Everything here is pure computation over in-memory data: line-shape
//! models of the hyperfine-resolved ODMR spectrum, the photocurrent noise
//! budget, a synthetic trace generator with a lock-in and servo model,
//! spectral estimation and IIR filtering, a damped Gauss-Newton fitter and
//! the Allan-deviation/sensitivity estimators. File formats, configuration
//! and the command line live in the `nvmag` companion crate.
//!
//! All quantities are SI: amperes, hertz, tesla, seconds.
#![no_std]
// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod dsp;
pub mod error;
pub mod fitting;
pub mod noise;
pub mod odmr;
pub mod rng;
pub mod sensor;
pub mod stability;
pub mod synth;
pub mod trace;

pub use error::{Error, Result};
pub use sensor::SensorConfig;
pub use trace::{TimeTrace, Units};

/// Elementary charge as used for the shot-noise estimate (C).
pub const ELEMENTARY_CHARGE: f64 = 1.6e-19;
