//! Straight-line fit to the near-resonant part of the spectrum.

use alloc::vec::Vec;

use crate::error::{ensure_finite, Error, Result};
use crate::odmr::OdmrSpectrum;

/// Default half-width of the linear window as a fraction of the central Γ.
///
/// The derivative Lorentzian bends as D ≈ s·δ·(1 − 8δ²/Γ²), so a regression
/// over |δ| ≤ X underestimates the slope by ≈ 4.8 (X/Γ)². Γ/20 keeps that
/// bias near 1%.
pub const DEFAULT_WINDOW_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroCrossingFit {
    /// dĨ/dδ (A/Hz).
    pub slope: f64,
    pub std_error: f64,
    pub intercept: f64,
    pub n_points: usize,
}

impl ZeroCrossingFit {
    /// Detuning where the fitted line crosses zero (Hz).
    pub fn zero_crossing(&self) -> f64 {
        -self.intercept / self.slope
    }
}

/// Ordinary least-squares line through the points with |δ| ≤ `window`.
pub fn fit_zero_crossing(spectrum: &OdmrSpectrum, window: f64) -> Result<ZeroCrossingFit> {
    ensure_finite("window", window)?;
    let pts: Vec<(f64, f64)> = spectrum
        .detunings()
        .iter()
        .zip(spectrum.demod_current())
        .filter(|(x, _)| x.abs() <= window)
        .map(|(&x, &y)| (x, y))
        .collect();
    if pts.len() < 3 {
        return Err(Error::invalid(alloc::format!(
            "{} points within ±{window} Hz; at least 3 are required",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let xm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - xm) * (p.0 - xm)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - xm) * (p.1 - ym)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("all detunings in the window coincide"));
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let rss: f64 = pts
        .iter()
        .map(|p| {
            let e = p.1 - (intercept + slope * p.0);
            e * e
        })
        .sum();
    let std_error = libm::sqrt(rss / (n - 2.0) / sxx);
    Ok(ZeroCrossingFit {
        slope,
        std_error,
        intercept,
        n_points: pts.len(),
    })
}
