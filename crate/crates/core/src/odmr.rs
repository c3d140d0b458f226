//! Line-shape models for the lock-in demodulated CW-ODMR spectrum.
//!
//! Frequency-modulated lock-in detection turns each Lorentzian resonance
//! into its derivative. With three-tone driving of the ¹⁴N hyperfine triplet
//! the spectrum of a single NV orientation is a sum of five derivative
//! Lorentzians on a grid spaced by the hyperfine splitting.
//!
//! Amplitude convention: `amplitude` multiplies the underlying Lorentzian
//! `L(δ) = A (Γ/2)² / ((δ−c)² + (Γ/2)²)`, and the model value is `dL/dδ`.
//! With detuning in Hz and the model in amperes, `A` therefore carries
//! A·Hz.

use alloc::vec::Vec;

use crate::error::{ensure_finite, Error, Result};

/// Number of resolved peaks under three-tone hyperfine driving.
pub const N_PEAKS: usize = 5;

/// Relative peak amplitudes used for synthetic three-tone spectra.
///
/// Detuning the three-tone comb by δ puts a tone on a hyperfine line when
/// δ ∈ {−2, −1, 0, 1, 2}·A_hf with 1, 2, 3, 2, 1 coincidences. The central
/// peak is scaled to the measured enhancement of 2.5 instead of 3 and the
/// inner satellites get the same per-coincidence saturation.
pub const THREE_TONE_RELATIVE_AMPLITUDES: [f64; N_PEAKS] =
    [1.0 / 2.5, 2.0 / 3.0, 1.0, 2.0 / 3.0, 1.0 / 2.5];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivLorentzianPeak {
    /// Lorentzian amplitude (A·Hz); sign follows the lock-in phase.
    pub amplitude: f64,
    /// Full width at half maximum of the underlying Lorentzian (Hz).
    pub fwhm: f64,
    /// Peak center detuning (Hz).
    pub center: f64,
}

impl DerivLorentzianPeak {
    pub fn new(amplitude: f64, fwhm: f64, center: f64) -> Self {
        Self {
            amplitude,
            fwhm,
            center,
        }
    }

    fn check(&self) -> Result<()> {
        ensure_finite("amplitude", self.amplitude)?;
        ensure_finite("fwhm", self.fwhm)?;
        ensure_finite("center", self.center)?;
        if self.fwhm <= 0.0 {
            return Err(Error::invalid("fwhm must be positive"));
        }
        Ok(())
    }

    /// Underlying (non-differentiated) Lorentzian at `delta`.
    pub fn lorentzian(&self, delta: f64) -> f64 {
        let b = 0.5 * self.fwhm;
        let u = delta - self.center;
        self.amplitude * b * b / (u * u + b * b)
    }

    /// Derivative-Lorentzian value without argument checks.
    #[inline]
    pub fn value(&self, delta: f64) -> f64 {
        let b = 0.5 * self.fwhm;
        let u = delta - self.center;
        let q = u * u + b * b;
        -2.0 * self.amplitude * b * b * u / (q * q)
    }

    /// d/dδ of [`Self::value`].
    #[inline]
    pub fn slope_at(&self, delta: f64) -> f64 {
        let b = 0.5 * self.fwhm;
        let u = delta - self.center;
        let q = u * u + b * b;
        -2.0 * self.amplitude * b * b * (b * b - 3.0 * u * u) / (q * q * q)
    }

    /// Partial derivatives of [`Self::value`] with respect to
    /// (amplitude, fwhm, center).
    #[inline]
    pub fn partials(&self, delta: f64) -> [f64; 3] {
        let a = self.amplitude;
        let b = 0.5 * self.fwhm;
        let u = delta - self.center;
        let q = u * u + b * b;
        let q2 = q * q;
        let q3 = q2 * q;
        let d_amp = -2.0 * b * b * u / q2;
        // d/dΓ = ½ d/db
        let d_fwhm = -2.0 * a * u * b * (u * u - b * b) / q3;
        let d_center = 2.0 * a * b * b * (b * b - 3.0 * u * u) / q3;
        [d_amp, d_fwhm, d_center]
    }
}

/// Lock-in ODMR spectrum: detunings (Hz) and demodulated photocurrent (A).
#[derive(Debug, Clone, PartialEq)]
pub struct OdmrSpectrum {
    detunings: Vec<f64>,
    demod_current: Vec<f64>,
    pub peaks: Option<[DerivLorentzianPeak; N_PEAKS]>,
}

impl OdmrSpectrum {
    pub fn new(detunings: Vec<f64>, demod_current: Vec<f64>) -> Result<Self> {
        if detunings.len() != demod_current.len() {
            return Err(Error::invalid("detunings and currents differ in length"));
        }
        if detunings.is_empty() {
            return Err(Error::invalid("spectrum is empty"));
        }
        if detunings
            .iter()
            .chain(&demod_current)
            .any(|v| !v.is_finite())
        {
            return Err(Error::invalid("spectrum contains non-finite values"));
        }
        if detunings.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("detunings must be strictly increasing"));
        }
        Ok(Self {
            detunings,
            demod_current,
            peaks: None,
        })
    }

    /// Sample `peaks` on `detunings` and add `noise[i]` to each point.
    pub fn from_model(
        detunings: Vec<f64>,
        peaks: &[DerivLorentzianPeak; N_PEAKS],
        noise: impl IntoIterator<Item = f64>,
    ) -> Result<Self> {
        let mut noise = noise.into_iter();
        let y = detunings
            .iter()
            .map(|&d| {
                let n = noise.next().unwrap_or(0.0);
                peaks.iter().map(|p| p.value(d)).sum::<f64>() + n
            })
            .collect();
        Self::new(detunings, y)
    }

    pub fn detunings(&self) -> &[f64] {
        &self.detunings
    }

    pub fn demod_current(&self) -> &[f64] {
        &self.demod_current
    }

    pub fn len(&self) -> usize {
        self.detunings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detunings.is_empty()
    }
}

/// D(δ) = −2A(Γ/2)²(δ−c) / ((δ−c)² + (Γ/2)²)².
pub fn deriv_lorentzian(delta: f64, peak: &DerivLorentzianPeak) -> Result<f64> {
    ensure_finite("detuning", delta)?;
    peak.check()?;
    Ok(peak.value(delta))
}

/// Sum of the five derivative Lorentzians at `delta`.
pub fn spectrum_model(delta: f64, peaks: &[DerivLorentzianPeak]) -> Result<f64> {
    if peaks.len() != N_PEAKS {
        return Err(Error::invalid(alloc::format!(
            "expected {N_PEAKS} peaks, got {}",
            peaks.len()
        )));
    }
    ensure_finite("detuning", delta)?;
    let mut sum = 0.0;
    for p in peaks {
        p.check()?;
        sum += p.value(delta);
    }
    Ok(sum)
}

/// Slope dD/dδ at the peak center, −8A/Γ².
pub fn analytic_center_slope(peak: &DerivLorentzianPeak) -> Result<f64> {
    ensure_finite("amplitude", peak.amplitude)?;
    ensure_finite("fwhm", peak.fwhm)?;
    if peak.fwhm == 0.0 {
        return Err(Error::singular("fwhm is zero"));
    }
    Ok(-8.0 * peak.amplitude / (peak.fwhm * peak.fwhm))
}

/// Photocurrent response to a field change, γ_e · dĨ/dδ (A/T).
pub fn field_response(slope: f64, gyromagnetic_ratio: f64) -> Result<f64> {
    ensure_finite("slope", slope)?;
    ensure_finite("gyromagnetic ratio", gyromagnetic_ratio)?;
    Ok(gyromagnetic_ratio * slope)
}

/// Peak centers {−2, −1, 0, 1, 2}·A_hf of the three-tone spectrum.
pub fn hyperfine_centers(splitting: f64) -> Result<[f64; N_PEAKS]> {
    ensure_finite("hyperfine splitting", splitting)?;
    if splitting <= 0.0 {
        return Err(Error::invalid("hyperfine splitting must be positive"));
    }
    Ok([
        -2.0 * splitting,
        -splitting,
        0.0,
        splitting,
        2.0 * splitting,
    ])
}

/// Five peaks on the hyperfine grid with a shared width and
/// [`THREE_TONE_RELATIVE_AMPLITUDES`], scaled so that the total slope of the
/// spectrum at δ = 0 equals `central_slope`.
pub fn three_tone_peaks(
    splitting: f64,
    fwhm: f64,
    central_slope: f64,
) -> Result<[DerivLorentzianPeak; N_PEAKS]> {
    let centers = hyperfine_centers(splitting)?;
    ensure_finite("fwhm", fwhm)?;
    ensure_finite("central slope", central_slope)?;
    if fwhm <= 0.0 {
        return Err(Error::invalid("fwhm must be positive"));
    }
    let mut peaks = [DerivLorentzianPeak::new(0.0, fwhm, 0.0); N_PEAKS];
    for (p, (&c, &rel)) in peaks
        .iter_mut()
        .zip(centers.iter().zip(THREE_TONE_RELATIVE_AMPLITUDES.iter()))
    {
        *p = DerivLorentzianPeak::new(rel, fwhm, c);
    }
    let unit_slope: f64 = peaks.iter().map(|p| p.slope_at(0.0)).sum();
    let scale = central_slope / unit_slope;
    for p in &mut peaks {
        p.amplitude *= scale;
    }
    Ok(peaks)
}

/// Total slope dĨ/dδ of a peak set at `delta`.
pub fn spectrum_slope(delta: f64, peaks: &[DerivLorentzianPeak]) -> f64 {
    peaks.iter().map(|p| p.slope_at(delta)).sum()
}

/// Five-peak spectrum on `n_points` evenly spaced detunings over
/// `±span`, with additive Gaussian noise of standard deviation
/// `rel_noise` × the largest noiseless |D|.
pub fn synthetic_spectrum(
    peaks: &[DerivLorentzianPeak; N_PEAKS],
    span: f64,
    n_points: usize,
    rel_noise: f64,
    seed: u64,
) -> Result<OdmrSpectrum> {
    ensure_finite("span", span)?;
    ensure_finite("relative noise", rel_noise)?;
    if span <= 0.0 || n_points < 2 || rel_noise < 0.0 {
        return Err(Error::invalid(
            "need a positive span, at least two points and nonnegative noise",
        ));
    }
    let step = 2.0 * span / (n_points - 1) as f64;
    let xs: Vec<f64> = (0..n_points).map(|i| -span + step * i as f64).collect();
    let height = xs
        .iter()
        .map(|&x| libm::fabs(peaks.iter().map(|p| p.value(x)).sum::<f64>()))
        .fold(0.0, f64::max);
    let mut rng = crate::rng::NoiseRng::seeded(seed);
    let sigma = rel_noise * height;
    let noise: Vec<f64> = (0..n_points).map(|_| sigma * rng.normal()).collect();
    OdmrSpectrum::from_model(xs, peaks, noise)
}
