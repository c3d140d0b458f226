//! Single-sided amplitude spectral density by segment averaging.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use super::fft;
use crate::error::{Error, Result};
use crate::trace::TimeTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Window {
    #[default]
    Rectangular,
    /// Periodic Hann, normalized so white-noise density is unbiased.
    Hann,
}

impl Window {
    fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; n],
            Window::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * libm::cos(2.0 * PI * i as f64 / n as f64))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeSpectrum {
    pub frequencies: Vec<f64>,
    /// Units per √Hz.
    pub density: Vec<f64>,
    pub n_averages: usize,
    pub resolution_bw: f64,
}

impl AmplitudeSpectrum {
    pub fn new(
        frequencies: Vec<f64>,
        density: Vec<f64>,
        n_averages: usize,
        resolution_bw: f64,
    ) -> Result<Self> {
        if frequencies.len() != density.len() || frequencies.is_empty() {
            return Err(Error::invalid(
                "frequency and density lengths differ or are zero",
            ));
        }
        if frequencies[0] < 0.0 || frequencies.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid(
                "frequencies must be ascending and nonnegative",
            ));
        }
        if density.iter().any(|d| !(*d >= 0.0 && d.is_finite())) {
            return Err(Error::invalid("densities must be finite and nonnegative"));
        }
        if n_averages == 0 || !(resolution_bw > 0.0) {
            return Err(Error::invalid(
                "n_averages and resolution bandwidth must be positive",
            ));
        }
        Ok(Self {
            frequencies,
            density,
            n_averages,
            resolution_bw,
        })
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    /// Σ density² · Δf, i.e. the variance the spectrum accounts for.
    pub fn total_power(&self) -> f64 {
        self.density.iter().map(|d| d * d).sum::<f64>() * self.resolution_bw
    }

    /// Bin with the largest density.
    pub fn peak(&self) -> (f64, f64) {
        let i = (0..self.len())
            .max_by(|&a, &b| self.density[a].total_cmp(&self.density[b]))
            .unwrap_or(0);
        (self.frequencies[i], self.density[i])
    }
}

/// ASD from `n_segments` consecutive, non-overlapping segments of
/// `segment_length` samples with a rectangular window.
pub fn asd(
    trace: &TimeTrace,
    segment_length: usize,
    n_segments: usize,
) -> Result<AmplitudeSpectrum> {
    asd_with(trace, segment_length, n_segments, Window::Rectangular)
}

/// Each segment has its mean removed, then the one-sided periodogram
/// `2|X_k|²/(Σw²·F_s)` (DC and Nyquist not doubled) is averaged over
/// segments and square-rooted.
pub fn asd_with(
    trace: &TimeTrace,
    segment_length: usize,
    n_segments: usize,
    window: Window,
) -> Result<AmplitudeSpectrum> {
    if segment_length < 2 {
        return Err(Error::invalid("segment length must be at least 2"));
    }
    if n_segments == 0 {
        return Err(Error::invalid("need at least one segment"));
    }
    let needed = segment_length
        .checked_mul(n_segments)
        .ok_or_else(|| Error::invalid("segment count overflows"))?;
    if needed > trace.len() {
        return Err(Error::invalid(alloc::format!(
            "{n_segments} segments of {segment_length} samples exceed trace length {}",
            trace.len()
        )));
    }
    let fs = trace.sampling_frequency();
    let n = segment_length;
    let w = window.coefficients(n);
    let wss: f64 = w.iter().map(|v| v * v).sum();
    let n_bins = n / 2 + 1;
    let mut power = vec![0.0; n_bins];
    for seg in trace.samples().chunks_exact(n).take(n_segments) {
        let m = seg.iter().sum::<f64>() / n as f64;
        let x: Vec<f64> = seg.iter().zip(&w).map(|(v, c)| (v - m) * c).collect();
        let spec = fft::forward_real(&x);
        for (k, p) in power.iter_mut().enumerate() {
            let edge = k == 0 || (n.is_multiple_of(2) && k == n / 2);
            let scale = if edge { 1.0 } else { 2.0 };
            *p += scale * spec[k].norm_sqr() / (wss * fs);
        }
    }
    let rbw = fs / n as f64;
    Ok(AmplitudeSpectrum {
        frequencies: (0..n_bins).map(|k| k as f64 * rbw).collect(),
        density: power
            .iter()
            .map(|p| libm::sqrt(p / n_segments as f64))
            .collect(),
        n_averages: n_segments,
        resolution_bw: rbw,
    })
}

/// RMS of the density over bins with `f_lo ≤ f ≤ f_hi`.
pub fn band_average(spectrum: &AmplitudeSpectrum, f_lo: f64, f_hi: f64) -> Result<f64> {
    let (sum, count) = spectrum
        .frequencies
        .iter()
        .zip(&spectrum.density)
        .filter(|(f, _)| **f >= f_lo && **f <= f_hi)
        .fold((0.0, 0usize), |(s, c), (_, d)| (s + d * d, c + 1));
    if count == 0 {
        return Err(Error::invalid(alloc::format!(
            "no spectral bins in [{f_lo}, {f_hi}] Hz"
        )));
    }
    Ok(libm::sqrt(sum / count as f64))
}
