//! Photocurrent noise budget of the balanced detector.
//!
//! The far-detuned noise floor of the demodulated photocurrent is modeled as
//! `n(I) = √(n_elec² + p₁·I + p₂·I²)`: a current-independent electrical floor,
//! photon shot noise linear in the photocurrent and residual laser intensity
//! noise quadratic in it.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::Matrix2;

use crate::error::{ensure_finite, Error, Result};
use crate::fitting::{nlls_fit, DataPoint, FitOptions, FitResult, Model};
use crate::ELEMENTARY_CHARGE;

/// Three-term noise model with the (p₁, p₂) covariance from its fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseBudget {
    /// Electrical noise floor (A/√Hz).
    pub n_elec: f64,
    /// Shot-noise coefficient (A/Hz).
    pub p1: f64,
    /// Intensity-noise coefficient (1/Hz).
    pub p2: f64,
    /// Covariance of (p₁, p₂).
    pub covariance: Matrix2<f64>,
}

impl NoiseBudget {
    pub fn new(n_elec: f64, p1: f64, p2: f64) -> Result<Self> {
        Self::with_covariance(n_elec, p1, p2, Matrix2::zeros())
    }

    pub fn with_covariance(
        n_elec: f64,
        p1: f64,
        p2: f64,
        covariance: Matrix2<f64>,
    ) -> Result<Self> {
        let b = Self {
            n_elec,
            p1,
            p2,
            covariance,
        };
        b.validate()?;
        Ok(b)
    }

    /// Fitted values of the HPHT sensor: 20 pA/√Hz, p₁ = (5.0 ± 0.6)×10⁻¹⁹ A/Hz,
    /// p₂ = (5.0 ± 0.5)×10⁻¹⁷ /Hz. No correlation between p₁ and p₂ is published;
    /// the covariance is diagonal.
    pub fn published() -> Self {
        Self {
            n_elec: 20e-12,
            p1: 5.0e-19,
            p2: 5.0e-17,
            covariance: Matrix2::new(0.6e-19 * 0.6e-19, 0.0, 0.0, 0.5e-17 * 0.5e-17),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("n_elec", self.n_elec), ("p1", self.p1), ("p2", self.p2)] {
            ensure_finite(name, v)?;
            if v < 0.0 {
                return Err(Error::invalid(format!(
                    "{name} must be nonnegative, got {v}"
                )));
            }
        }
        let c = &self.covariance;
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("covariance must be finite"));
        }
        let scale = c[(0, 0)].abs().max(c[(1, 1)].abs()).max(f64::MIN_POSITIVE);
        if (c[(0, 1)] - c[(1, 0)]).abs() > 1e-9 * scale {
            return Err(Error::invalid("covariance must be symmetric"));
        }
        let det = c[(0, 0)] * c[(1, 1)] - c[(0, 1)] * c[(1, 0)];
        if c[(0, 0)] < 0.0 || c[(1, 1)] < 0.0 || det < -1e-9 * scale * scale {
            return Err(Error::invalid("covariance must be positive semidefinite"));
        }
        Ok(())
    }

    /// Model value at photocurrent `i_fl` without argument checks.
    pub fn density(&self, i_fl: f64) -> f64 {
        libm::sqrt(self.n_elec * self.n_elec + self.p1 * i_fl + self.p2 * i_fl * i_fl)
    }

    /// Shot-noise part √(p₁·I) (A/√Hz).
    pub fn shot_component(&self, i_fl: f64) -> f64 {
        libm::sqrt(self.p1 * i_fl)
    }

    /// Intensity-noise part √(p₂)·I (A/√Hz).
    pub fn intensity_component(&self, i_fl: f64) -> f64 {
        libm::sqrt(self.p2) * i_fl
    }
}

/// One far-detuned noise-floor measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseDatum {
    /// Fluorescence photocurrent (A).
    pub i_fl: f64,
    /// Band-averaged noise floor (A/√Hz).
    pub n_far: f64,
    /// Relative one-sigma uncertainty of `n_far`.
    pub rel_uncertainty: f64,
}

impl NoiseDatum {
    pub const DEFAULT_REL_UNCERTAINTY: f64 = 0.05;

    pub fn new(i_fl: f64, n_far: f64) -> Self {
        Self {
            i_fl,
            n_far,
            rel_uncertainty: Self::DEFAULT_REL_UNCERTAINTY,
        }
    }
}

/// Shot-noise amplitude density √(2·q_e·I) per photodiode (A/√Hz); with
/// balanced detection both photodiodes carry I, giving √(2·2·q_e·I).
pub fn shot_noise_density(i_fl: f64, balanced: bool) -> Result<f64> {
    ensure_finite("photocurrent", i_fl)?;
    if i_fl < 0.0 {
        return Err(Error::invalid("photocurrent must be nonnegative"));
    }
    let detectors = if balanced { 2.0 } else { 1.0 };
    Ok(libm::sqrt(detectors * 2.0 * ELEMENTARY_CHARGE * i_fl))
}

/// √(n_elec² + p₁·I + p₂·I²).
pub fn noise_model_eval(i_fl: f64, budget: &NoiseBudget) -> Result<f64> {
    ensure_finite("photocurrent", i_fl)?;
    budget.validate()?;
    Ok(budget.density(i_fl))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseFitOptions {
    /// Fit the electrical floor instead of holding it at the supplied value.
    pub fit_elec: bool,
    pub fit: FitOptions,
}

impl Default for NoiseFitOptions {
    fn default() -> Self {
        Self {
            fit_elec: false,
            fit: FitOptions {
                absolute_weights: true,
                ..FitOptions::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseFit {
    pub budget: NoiseBudget,
    pub result: FitResult,
}

impl NoiseFit {
    /// True when the two coefficients are exactly determined by two points,
    /// so the fit carries no goodness-of-fit information.
    pub fn is_exactly_determined(&self) -> bool {
        self.result.is_exactly_determined()
    }
}

struct FixedFloor {
    n_elec_sq: f64,
}

impl Model for FixedFloor {
    fn n_params(&self) -> usize {
        2
    }
    fn eval(&self, i: f64, p: &[f64]) -> f64 {
        libm::sqrt((self.n_elec_sq + p[0] * i + p[1] * i * i).max(0.0))
    }
    fn partials(&self, i: f64, p: &[f64], out: &mut [f64]) -> bool {
        let f = self.eval(i, p);
        if f == 0.0 {
            return false;
        }
        out[0] = i / (2.0 * f);
        out[1] = i * i / (2.0 * f);
        true
    }
}

struct FreeFloor;

impl Model for FreeFloor {
    fn n_params(&self) -> usize {
        3
    }
    fn eval(&self, i: f64, p: &[f64]) -> f64 {
        libm::sqrt((p[2] * p[2] + p[0] * i + p[1] * i * i).max(0.0))
    }
    fn partials(&self, i: f64, p: &[f64], out: &mut [f64]) -> bool {
        let f = self.eval(i, p);
        if f == 0.0 {
            return false;
        }
        out[0] = i / (2.0 * f);
        out[1] = i * i / (2.0 * f);
        out[2] = p[2] / f;
        true
    }
}

/// Weighted least-squares fit of (p₁, p₂) to far-detuned noise data, with the
/// electrical floor held at `n_elec` unless `options.fit_elec` is set.
///
/// Each residual is weighted by 1/(rel_uncertainty·n_far) and the weights are
/// taken as absolute, so the returned covariance is (JᵀWJ)⁻¹.
pub fn fit_noise_model(
    data: &[NoiseDatum],
    n_elec: f64,
    options: &NoiseFitOptions,
) -> Result<NoiseFit> {
    ensure_finite("n_elec", n_elec)?;
    for d in data {
        if !(d.i_fl >= 0.0 && d.i_fl.is_finite()) {
            return Err(Error::invalid(
                "photocurrents must be nonnegative and finite",
            ));
        }
        if !(d.n_far > 0.0 && d.n_far.is_finite()) {
            return Err(Error::invalid(
                "noise densities must be positive and finite",
            ));
        }
        if !(d.rel_uncertainty > 0.0 && d.rel_uncertainty.is_finite()) {
            return Err(Error::invalid("relative uncertainties must be positive"));
        }
    }
    let mut currents: Vec<f64> = data.iter().map(|d| d.i_fl).filter(|&i| i > 0.0).collect();
    currents.sort_by(f64::total_cmp);
    currents.dedup();
    if currents.len() < 2 {
        return Err(Error::FitFailure(
            "need at least two distinct nonzero photocurrents to separate p1 and p2".into(),
        ));
    }

    let points: Vec<DataPoint> = data
        .iter()
        .map(|d| DataPoint::new(d.i_fl, d.n_far, 1.0 / (d.rel_uncertainty * d.n_far)))
        .collect();

    // Linear least squares on n² − n_elec² = p₁ I + p₂ I² for the start.
    let (mut s11, mut s12, mut s22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for d in data {
        let w = 1.0 / (2.0 * d.rel_uncertainty * d.n_far * d.n_far);
        let w2 = w * w;
        let y = d.n_far * d.n_far - n_elec * n_elec;
        let (a, b) = (d.i_fl, d.i_fl * d.i_fl);
        s11 += w2 * a * a;
        s12 += w2 * a * b;
        s22 += w2 * b * b;
        b1 += w2 * a * y;
        b2 += w2 * b * y;
    }
    let det = s11 * s22 - s12 * s12;
    if !(det.abs() > 0.0) {
        return Err(Error::FitFailure("degenerate design matrix".into()));
    }
    let p1_0 = ((s22 * b1 - s12 * b2) / det).max(0.0);
    let p2_0 = ((s11 * b2 - s12 * b1) / det).max(0.0);
    // keep both coefficients away from zero so their columns stay alive
    let mean_i = currents.iter().sum::<f64>() / currents.len() as f64;
    let scale = data.iter().map(|d| d.n_far * d.n_far).fold(0.0, f64::max);
    let p1_0 = if p1_0 > 0.0 {
        p1_0
    } else {
        1e-3 * scale / mean_i
    };
    let p2_0 = if p2_0 > 0.0 {
        p2_0
    } else {
        1e-3 * scale / (mean_i * mean_i)
    };

    let (budget_p, result) = if options.fit_elec {
        let res = nlls_fit(&FreeFloor, &points, &[p1_0, p2_0, n_elec], &options.fit)?;
        ((res.params[2].abs(), res.params[0], res.params[1]), res)
    } else {
        let model = FixedFloor {
            n_elec_sq: n_elec * n_elec,
        };
        let res = nlls_fit(&model, &points, &[p1_0, p2_0], &options.fit)?;
        ((n_elec, res.params[0], res.params[1]), res)
    };

    let covariance = match &result.covariance {
        Some(c) => Matrix2::new(c[(0, 0)], c[(0, 1)], c[(1, 0)], c[(1, 1)]),
        None => Matrix2::from_element(f64::NAN),
    };
    let budget = NoiseBudget {
        n_elec: budget_p.0,
        p1: budget_p.1,
        p2: budget_p.2,
        covariance,
    };
    Ok(NoiseFit { budget, result })
}

/// Photocurrent p₁/p₂ at which shot and intensity noise are equal, with its
/// first-order standard uncertainty from the (p₁, p₂) covariance.
pub fn equivalent_photocurrent(budget: &NoiseBudget) -> Result<(f64, f64)> {
    ensure_finite("p1", budget.p1)?;
    ensure_finite("p2", budget.p2)?;
    if budget.p2 == 0.0 {
        return Err(Error::singular("p2 is zero"));
    }
    let (p1, p2) = (budget.p1, budget.p2);
    let value = p1 / p2;
    let g = [1.0 / p2, -p1 / (p2 * p2)];
    let c = &budget.covariance;
    let var = g[0] * g[0] * c[(0, 0)] + 2.0 * g[0] * g[1] * c[(0, 1)] + g[1] * g[1] * c[(1, 1)];
    Ok((value, libm::sqrt(var.max(0.0))))
}

/// Reduction of intensity noise by balanced detection,
/// √((σ_on² − psn_on²)/(σ_off² − psn_off²)).
pub fn reduction_rate(sigma_on: f64, psn_on: f64, sigma_off: f64, psn_off: f64) -> Result<f64> {
    for (n, v) in [
        ("sigma_on", sigma_on),
        ("psn_on", psn_on),
        ("sigma_off", sigma_off),
        ("psn_off", psn_off),
    ] {
        ensure_finite(n, v)?;
        if v < 0.0 {
            return Err(Error::invalid(format!("{n} must be nonnegative")));
        }
    }
    if sigma_on <= psn_on || sigma_off <= psn_off {
        return Err(Error::invalid(
            "shot noise must be smaller than the total noise it is subtracted from",
        ));
    }
    Ok(libm::sqrt(
        (sigma_on * sigma_on - psn_on * psn_on) / (sigma_off * sigma_off - psn_off * psn_off),
    ))
}

/// Relative intensity noise 10·log₁₀(σ²/(bw·I²)) in dBc/Hz.
pub fn relative_intensity_noise(sigma: f64, current: f64, bandwidth: f64) -> Result<f64> {
    for (n, v) in [
        ("sigma", sigma),
        ("current", current),
        ("bandwidth", bandwidth),
    ] {
        ensure_finite(n, v)?;
        if v <= 0.0 {
            return Err(Error::invalid(format!("{n} must be positive")));
        }
    }
    Ok(10.0 * libm::log10(sigma * sigma / (bandwidth * current * current)))
}

/// Field noise density n_I / (γ_e·|dĨ/dδ|) in T/√Hz.
pub fn field_noise_floor(n_current: f64, slope: f64, gyromagnetic_ratio: f64) -> Result<f64> {
    ensure_finite("current noise", n_current)?;
    ensure_finite("slope", slope)?;
    ensure_finite("gyromagnetic ratio", gyromagnetic_ratio)?;
    if slope == 0.0 || gyromagnetic_ratio == 0.0 {
        return Err(Error::singular("zero field response"));
    }
    Ok(n_current.abs() / (gyromagnetic_ratio * slope).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::NoiseRng;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const NEP_BW: f64 = 168.8;

    #[test]
    fn shot_noise_at_25_ma() {
        let bal = shot_noise_density(25e-3, true).unwrap() * libm::sqrt(NEP_BW);
        let unbal = shot_noise_density(25e-3, false).unwrap() * libm::sqrt(NEP_BW);
        // √(4·1.6e-19·0.025·168.8), √(2·1.6e-19·0.025·168.8)
        assert_relative_eq!(bal, 1.643_411e-9, max_relative = 1e-6);
        assert_relative_eq!(unbal, 1.162_067e-9, max_relative = 1e-6);
        assert_eq!(shot_noise_density(0.0, true).unwrap(), 0.0);
        assert!(shot_noise_density(-1e-3, true).is_err());
    }

    #[test]
    fn noise_model_examples() {
        let b = NoiseBudget::published();
        assert_relative_eq!(
            noise_model_eval(0.0, &b).unwrap(),
            20e-12,
            max_relative = 1e-12
        );
        // √(4e-22 + 3.2e-21 + 2.048e-21)
        assert_relative_eq!(
            noise_model_eval(6.4e-3, &b).unwrap(),
            7.5153e-11,
            max_relative = 1e-4
        );
        let i_eq = b.p1 / b.p2;
        assert_relative_eq!(b.p1 * i_eq, b.p2 * i_eq * i_eq, max_relative = 1e-12);
    }

    fn synthetic(currents: &[f64]) -> Vec<NoiseDatum> {
        let b = NoiseBudget::published();
        currents
            .iter()
            .map(|&i| NoiseDatum::new(i, b.density(i)))
            .collect()
    }

    #[test]
    fn noiseless_round_trip() {
        let data = synthetic(&[1e-3, 2e-3, 5e-3, 10e-3, 20e-3, 30e-3]);
        let fit = fit_noise_model(&data, 20e-12, &NoiseFitOptions::default()).unwrap();
        assert_relative_eq!(fit.budget.p1, 5.0e-19, max_relative = 1e-6);
        assert_relative_eq!(fit.budget.p2, 5.0e-17, max_relative = 1e-6);
        assert!(fit.result.converged);
    }

    #[test]
    fn free_floor_round_trip() {
        let data = synthetic(&[0.0, 1e-3, 2e-3, 5e-3, 10e-3, 20e-3, 30e-3]);
        let opts = NoiseFitOptions {
            fit_elec: true,
            ..Default::default()
        };
        let fit = fit_noise_model(&data, 30e-12, &opts).unwrap();
        assert_relative_eq!(fit.budget.n_elec, 20e-12, max_relative = 1e-6);
        assert_relative_eq!(fit.budget.p1, 5.0e-19, max_relative = 1e-6);
    }

    #[test]
    fn two_points_are_exactly_determined() {
        let data = synthetic(&[5e-3, 20e-3]);
        let fit = fit_noise_model(&data, 20e-12, &NoiseFitOptions::default()).unwrap();
        assert!(fit.is_exactly_determined());
        assert_relative_eq!(fit.budget.p1, 5.0e-19, max_relative = 1e-6);
        assert_relative_eq!(fit.budget.p2, 5.0e-17, max_relative = 1e-6);
    }

    #[test]
    fn degenerate_currents_fail() {
        let data = synthetic(&[5e-3, 5e-3, 5e-3]);
        assert!(matches!(
            fit_noise_model(&data, 20e-12, &NoiseFitOptions::default()),
            Err(Error::FitFailure(_))
        ));
    }

    #[test]
    fn noisy_fit_covers_truth() {
        // 20 points over 0.5–30 mA with 5% multiplicative noise
        let b = NoiseBudget::published();
        let mut rng = NoiseRng::seeded(2023);
        let data: Vec<NoiseDatum> = (1..=20)
            .map(|k| {
                let i = 1.5e-3 * k as f64;
                let e = rng.normal();
                NoiseDatum::new(i, b.density(i) * (1.0 + 0.05 * e))
            })
            .collect();
        let fit = fit_noise_model(&data, 20e-12, &NoiseFitOptions::default()).unwrap();
        let se = fit.result.std_errors().unwrap();
        assert!((fit.budget.p1 - 5.0e-19).abs() < 3.0 * se[0]);
        assert!((fit.budget.p2 - 5.0e-17).abs() < 3.0 * se[1]);
    }

    #[test]
    fn equivalent_photocurrent_examples() {
        let (v, s) = equivalent_photocurrent(&NoiseBudget::published()).unwrap();
        assert_relative_eq!(v, 10e-3, max_relative = 1e-12);
        // √(0.12² + 0.10²)·10 mA
        assert_relative_eq!(s, 1.562_05e-3, max_relative = 1e-5);
        let zero = NoiseBudget::new(20e-12, 0.0, 5e-17).unwrap();
        assert_eq!(equivalent_photocurrent(&zero).unwrap().0, 0.0);
        let singular = NoiseBudget::new(20e-12, 5e-19, 0.0).unwrap();
        assert!(matches!(
            equivalent_photocurrent(&singular),
            Err(Error::SingularParameter(_))
        ));
    }

    #[test]
    fn equivalent_photocurrent_uncertainty_vs_monte_carlo() {
        // Oracle: 10⁵ draws of (p₁, p₂) from the covariance, Cholesky factor.
        let mut b = NoiseBudget::published();
        b.covariance[(0, 1)] = -0.3 * 0.6e-19 * 0.5e-17;
        b.covariance[(1, 0)] = b.covariance[(0, 1)];
        let (_, linear) = equivalent_photocurrent(&b).unwrap();
        let c = b.covariance;
        let l11 = libm::sqrt(c[(0, 0)]);
        let l21 = c[(1, 0)] / l11;
        let l22 = libm::sqrt(c[(1, 1)] - l21 * l21);
        let mut rng = NoiseRng::seeded(99);
        let n = 100_000;
        let mut ratios = Vec::with_capacity(n);
        for _ in 0..n {
            let z1 = rng.normal();
            let z2 = rng.normal();
            let p1 = b.p1 + l11 * z1;
            let p2 = b.p2 + l21 * z1 + l22 * z2;
            ratios.push(p1 / p2);
        }
        let m = ratios.iter().sum::<f64>() / n as f64;
        let sd = libm::sqrt(ratios.iter().map(|r| (r - m) * (r - m)).sum::<f64>() / (n - 1) as f64);
        assert_relative_eq!(linear, sd, max_relative = 0.10);
    }

    #[test]
    fn reduction_rate_examples() {
        // √((3.0² − 1.6²)/(130² − 1.2²))
        let r = reduction_rate(3.0e-9, 1.6e-9, 130e-9, 1.2e-9).unwrap();
        assert_relative_eq!(r, 1.952_17e-2, max_relative = 1e-5);
        let r = reduction_rate(3.0e-9, 0.0, 130e-9, 0.0).unwrap();
        assert_relative_eq!(r, 3.0 / 130.0, max_relative = 1e-12);
        let mut prev = f64::INFINITY;
        for eps in [1e-10, 1e-12, 1e-14] {
            let r = reduction_rate(1.6e-9 + eps, 1.6e-9, 130e-9, 1.2e-9).unwrap();
            assert!(r < prev);
            prev = r;
        }
        assert!(prev < 1e-4);
        assert!(reduction_rate(1.0e-9, 1.6e-9, 130e-9, 1.2e-9).is_err());
    }

    #[test]
    fn rin_examples() {
        let r = relative_intensity_noise(130e-9, 25e-3, 168.8).unwrap();
        assert!((r - (-127.95)).abs() < 0.01, "{r}");
        let bw: f64 = 100.0;
        let i: f64 = 1e-3;
        assert!(
            relative_intensity_noise(libm::sqrt(bw) * i, i, bw)
                .unwrap()
                .abs()
                < 1e-12
        );
        let a = relative_intensity_noise(1e-9, 1e-3, 100.0).unwrap();
        let b = relative_intensity_noise(2e-9, 1e-3, 100.0).unwrap();
        assert_relative_eq!(b - a, 6.0206, max_relative = 1e-4);
        assert!(relative_intensity_noise(0.0, 1e-3, 100.0).is_err());
    }

    #[test]
    fn field_noise_floor_examples() {
        let n = shot_noise_density(6.4e-3, true).unwrap();
        assert_relative_eq!(n, 6.4e-11, max_relative = 1e-12);
        let b = field_noise_floor(n, 332e-12, 28.0e9).unwrap();
        assert!((b - 6.9e-12).abs() < 0.02 * 6.9e-12, "{b}");
        assert_eq!(field_noise_floor(0.0, 332e-12, 28.0e9).unwrap(), 0.0);
        assert!(matches!(
            field_noise_floor(n, 0.0, 28.0e9),
            Err(Error::SingularParameter(_))
        ));
        let full = noise_model_eval(6.4e-3, &NoiseBudget::published()).unwrap();
        let b = field_noise_floor(full, 332e-12, 28.0e9).unwrap();
        assert_relative_eq!(b, 8.08e-12, max_relative = 1e-3);
    }

    proptest! {
        #[test]
        fn model_monotone(i in 0.0f64..0.1, d in 0.0f64..0.1) {
            let b = NoiseBudget::published();
            prop_assert!(b.density(i + d) >= b.density(i));
        }

        #[test]
        fn balanced_is_root_two_times_single(i in 0.0f64..1.0) {
            let a = shot_noise_density(i, true).unwrap();
            let b = shot_noise_density(i, false).unwrap();
            prop_assert!((a - libm::sqrt(2.0) * b).abs() <= 1e-15 * a.max(1e-300));
        }

        #[test]
        fn field_floor_homogeneity(n in 1e-12f64..1e-9, s in 1e-12f64..1e-9, k in 0.1f64..10.0) {
            let base = field_noise_floor(n, s, 28e9).unwrap();
            let scaled_n = field_noise_floor(k * n, s, 28e9).unwrap();
            let scaled_s = field_noise_floor(n, k * s, 28e9).unwrap();
            prop_assert!((scaled_n - k * base).abs() <= 1e-12 * scaled_n);
            prop_assert!((scaled_s - base / k).abs() <= 1e-12 * base);
        }
    }
}
