//! Five-peak derivative-Lorentzian fit of the lock-in ODMR spectrum.

use alloc::format;
use alloc::vec::Vec;

use super::lm::{nlls_fit, DataPoint, FitOptions, FitResult, Model};
use crate::error::{ensure_finite, Error, Result};
use crate::odmr::{hyperfine_centers, DerivLorentzianPeak, OdmrSpectrum, N_PEAKS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WidthMode {
    /// One Γ for all five peaks.
    #[default]
    Shared,
    PerPeak,
}

/// Parameter layout: five amplitudes, then one or five widths, then five
/// centers when they float.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdmrModel {
    /// Fixed centers, or `None` to fit them.
    pub fixed_centers: Option<[f64; N_PEAKS]>,
    pub width_mode: WidthMode,
}

impl OdmrModel {
    fn n_widths(&self) -> usize {
        match self.width_mode {
            WidthMode::Shared => 1,
            WidthMode::PerPeak => N_PEAKS,
        }
    }

    fn width_index(&self, k: usize) -> usize {
        N_PEAKS
            + match self.width_mode {
                WidthMode::Shared => 0,
                WidthMode::PerPeak => k,
            }
    }

    fn center_index(&self, k: usize) -> Option<usize> {
        self.fixed_centers
            .is_none()
            .then(|| N_PEAKS + self.n_widths() + k)
    }

    pub fn peaks(&self, p: &[f64]) -> [DerivLorentzianPeak; N_PEAKS] {
        core::array::from_fn(|k| {
            let center = match (self.fixed_centers, self.center_index(k)) {
                (Some(c), _) => c[k],
                (None, Some(i)) => p[i],
                (None, None) => unreachable!(),
            };
            DerivLorentzianPeak::new(p[k], p[self.width_index(k)], center)
        })
    }

    pub fn pack(&self, peaks: &[DerivLorentzianPeak; N_PEAKS]) -> Vec<f64> {
        let mut p = alloc::vec![0.0; self.n_params()];
        for (k, pk) in peaks.iter().enumerate() {
            p[k] = pk.amplitude;
            p[self.width_index(k)] = pk.fwhm;
            if let Some(i) = self.center_index(k) {
                p[i] = pk.center;
            }
        }
        if self.width_mode == WidthMode::Shared {
            p[N_PEAKS] = peaks[N_PEAKS / 2].fwhm;
        }
        p
    }
}

impl Model for OdmrModel {
    fn n_params(&self) -> usize {
        N_PEAKS
            + self.n_widths()
            + if self.fixed_centers.is_some() {
                0
            } else {
                N_PEAKS
            }
    }

    fn eval(&self, x: f64, p: &[f64]) -> f64 {
        self.peaks(p).iter().map(|pk| pk.value(x)).sum()
    }

    fn partials(&self, x: f64, p: &[f64], out: &mut [f64]) -> bool {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (k, pk) in self.peaks(p).iter().enumerate() {
            let [da, dg, dc] = pk.partials(x);
            out[k] = da;
            out[self.width_index(k)] += dg;
            if let Some(i) = self.center_index(k) {
                out[i] = dc;
            }
        }
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdmrFitOptions {
    /// Pin the centers to the hyperfine grid.
    pub constrain_centers: bool,
    pub width_mode: WidthMode,
    pub fit: FitOptions,
}

impl Default for OdmrFitOptions {
    fn default() -> Self {
        Self {
            constrain_centers: true,
            width_mode: WidthMode::Shared,
            fit: FitOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdmrFit {
    /// Input spectrum with `peaks` filled in, centers ascending.
    pub spectrum: OdmrSpectrum,
    pub peaks: [DerivLorentzianPeak; N_PEAKS],
    pub result: FitResult,
}

impl OdmrFit {
    /// Slope of the fitted model at δ = 0 (A/Hz).
    pub fn central_slope(&self) -> f64 {
        crate::odmr::spectrum_slope(0.0, &self.peaks)
    }
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    match xs.iter().position(|&v| v >= x) {
        Some(0) => ys[0],
        None => ys[ys.len() - 1],
        Some(i) => {
            let t = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
            ys[i - 1] + t * (ys[i] - ys[i - 1])
        }
    }
}

/// Starting point for the five-peak fit: centers on the hyperfine grid, Γ
/// from the peak-to-trough spacing of the central lobe (×√3), amplitudes
/// from the lobe extremes around each center.
pub fn initial_guess(
    spectrum: &OdmrSpectrum,
    splitting: f64,
) -> Result<[DerivLorentzianPeak; N_PEAKS]> {
    let centers = hyperfine_centers(splitting)?;
    let xs = spectrum.detunings();
    let ys = spectrum.demod_current();

    let lobe: Vec<usize> = (0..xs.len())
        .filter(|&i| xs[i].abs() <= 0.5 * splitting)
        .collect();
    if lobe.len() < 3 {
        return Err(Error::invalid("too few points around the central peak"));
    }
    let imax = *lobe
        .iter()
        .max_by(|&&a, &&b| ys[a].total_cmp(&ys[b]))
        .unwrap();
    let imin = *lobe
        .iter()
        .min_by(|&&a, &&b| ys[a].total_cmp(&ys[b]))
        .unwrap();
    let spacing = (xs[imax] - xs[imin]).abs();
    if spacing == 0.0 {
        return Err(Error::FitFailure("central lobe has no extent".into()));
    }
    let fwhm = libm::sqrt(3.0) * spacing;

    // D(c ± Γ/(2√3)) = ∓ (3√3/4) A/Γ
    let d = fwhm / (2.0 * libm::sqrt(3.0));
    let extremum = 3.0 * libm::sqrt(3.0) / 4.0;
    Ok(core::array::from_fn(|k| {
        let c = centers[k];
        let left = interpolate(xs, ys, c - d);
        let right = interpolate(xs, ys, c + d);
        let amplitude = -fwhm * (right - left) / (2.0 * extremum);
        DerivLorentzianPeak::new(amplitude, fwhm, c)
    }))
}

/// Fit five derivative Lorentzians to `spectrum`.
pub fn fit_odmr_spectrum(
    spectrum: &OdmrSpectrum,
    splitting: f64,
    options: &OdmrFitOptions,
) -> Result<OdmrFit> {
    ensure_finite("hyperfine splitting", splitting)?;
    let xs = spectrum.detunings();
    let span = 2.0 * splitting * (1.0 - 1e-9);
    if xs[0] > -span || xs[xs.len() - 1] < span {
        return Err(Error::invalid(format!(
            "spectrum spans [{}, {}] Hz; at least ±{} Hz is required",
            xs[0],
            xs[xs.len() - 1],
            2.0 * splitting
        )));
    }

    let start = initial_guess(spectrum, splitting)?;
    let model = OdmrModel {
        fixed_centers: options
            .constrain_centers
            .then(|| hyperfine_centers(splitting))
            .transpose()?,
        width_mode: options.width_mode,
    };
    let data: Vec<DataPoint> = xs
        .iter()
        .zip(spectrum.demod_current())
        .map(|(&x, &y)| DataPoint::unweighted(x, y))
        .collect();
    let result = nlls_fit(&model, &data, &model.pack(&start), &options.fit)?;
    let mut peaks = model.peaks(&result.params);
    peaks.sort_by(|a, b| a.center.total_cmp(&b.center));

    let mut fitted = spectrum.clone();
    fitted.peaks = Some(peaks);
    Ok(OdmrFit {
        spectrum: fitted,
        peaks,
        result,
    })
}
