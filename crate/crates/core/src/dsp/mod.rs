//! Spectral estimation, IIR filtering and noise-bandwidth estimation.

pub mod fft;
pub mod filter;
pub mod nep;
pub mod spectrum;

pub use filter::{
    apply_filter_chain, apply_filter_chain_with, Bandpass, Biquad, FilterChain, FilterMode,
    OnePoleCascade,
};
pub use nep::{integrated_nep, nep_bandwidth, FilterSpec, NepEstimate};
pub use spectrum::{asd, asd_with, band_average, AmplitudeSpectrum, Window};
