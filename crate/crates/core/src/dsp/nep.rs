//! Noise-equivalent-power bandwidth of a filter.
//!
//! The Monte Carlo estimator pushes unit white noise through the filter and
//! reports `(σ′/σ)²·F_s/2`. [`integrated_nep`] evaluates the same quantity
//! deterministically as `∫₀^{F_s/2} |H(f)|² df`.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use super::fft;
use super::filter::{
    filter_samples, settle_length, Biquad, FilterChain, FilterMode, OnePoleCascade,
};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, NoiseRng};
use crate::trace::sample_std;

pub const DEFAULT_NEP_SAMPLES: usize = 1 << 16;
pub const DEFAULT_NEP_TRIALS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub enum FilterSpec {
    Chain(FilterChain, FilterMode),
    /// Lock-in output filter: identical one-pole cascade, run causally.
    Lockin(OnePoleCascade),
    OnePole {
        f3db: f64,
    },
    /// Ideal band-pass applied in the frequency domain.
    BrickWall {
        f_lo: f64,
        f_hi: f64,
    },
    Identity,
}

impl FilterSpec {
    fn sections(&self, fs: f64) -> Result<Vec<Biquad>> {
        match self {
            FilterSpec::Chain(c, mode) => c.sections(fs, *mode),
            FilterSpec::Lockin(c) => c.sections(fs),
            FilterSpec::OnePole { f3db } => Ok(vec![Biquad::one_pole_lowpass(*f3db, fs)?]),
            FilterSpec::BrickWall { .. } | FilterSpec::Identity => Ok(Vec::new()),
        }
    }

    fn mode(&self) -> FilterMode {
        match self {
            FilterSpec::Chain(_, mode) => *mode,
            _ => FilterMode::Causal,
        }
    }

    fn validate(&self, fs: f64) -> Result<()> {
        if let FilterSpec::BrickWall { f_lo, f_hi } = *self {
            if !(0.0 <= f_lo && f_lo < f_hi && f_hi <= fs / 2.0) {
                return Err(Error::invalid(
                    "brick-wall band must satisfy 0 ≤ f_lo < f_hi ≤ F_s/2",
                ));
            }
        }
        self.sections(fs).map(|_| ())
    }

    /// Power response |H(f)|² seen by the filtered signal.
    pub fn power_response(&self, f: f64, fs: f64) -> Result<f64> {
        if let FilterSpec::BrickWall { f_lo, f_hi } = *self {
            return Ok(if f >= f_lo && f <= f_hi { 1.0 } else { 0.0 });
        }
        let h2: f64 = self
            .sections(fs)?
            .iter()
            .map(|s| s.response(f, fs).norm_sqr())
            .product();
        Ok(match self.mode() {
            FilterMode::ZeroPhase => h2 * h2,
            FilterMode::Causal => h2,
        })
    }

    /// Filter `x`; for brick-wall the record is treated as periodic.
    pub fn apply(&self, x: &[f64], fs: f64) -> Result<Vec<f64>> {
        match *self {
            FilterSpec::Identity => Ok(x.to_vec()),
            FilterSpec::BrickWall { f_lo, f_hi } => {
                let n = x.len();
                let mut spec = fft::forward_real(x);
                for (k, v) in spec.iter_mut().enumerate() {
                    let f = k.min(n - k) as f64 * fs / n as f64;
                    if f < f_lo || f > f_hi {
                        *v = Complex64::new(0.0, 0.0);
                    }
                }
                Ok(fft::inverse(&spec).iter().map(|c| c.re).collect())
            }
            _ => Ok(filter_samples(&self.sections(fs)?, x, self.mode())),
        }
    }

    /// Samples discarded at each end of a Monte Carlo record.
    fn warmup(&self, fs: f64) -> Result<usize> {
        Ok(settle_length(&self.sections(fs)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NepEstimate {
    /// Hz.
    pub value: f64,
    pub std_error: f64,
    pub trials: usize,
    /// The filter passed no noise at all; `value` is 0.
    pub degenerate: bool,
}

/// Monte Carlo NEP bandwidth: mean over `trials` independent records of
/// `n_samples` unit-variance white samples, with per-trial seeds derived
/// from `seed`.
pub fn nep_bandwidth(
    spec: &FilterSpec,
    fs: f64,
    n_samples: usize,
    trials: usize,
    seed: u64,
) -> Result<NepEstimate> {
    if !(fs > 0.0 && fs.is_finite()) {
        return Err(Error::invalid("sampling frequency must be positive"));
    }
    if n_samples < 16 {
        return Err(Error::invalid("need at least 16 samples per trial"));
    }
    if trials < 2 {
        return Err(Error::invalid(
            "need at least 2 trials for a standard error",
        ));
    }
    spec.validate(fs)?;
    let warm = spec.warmup(fs)?.min(8 * n_samples);
    let mut estimates = Vec::with_capacity(trials);
    let mut x = vec![0.0; n_samples + 2 * warm];
    for t in 0..trials {
        NoiseRng::seeded(derive_seed(seed, t as u64)).fill_normal(&mut x, 1.0);
        let y = spec.apply(&x, fs)?;
        let sigma_in = sample_std(&x[warm..warm + n_samples]);
        let sigma_out = sample_std(&y[warm..warm + n_samples]);
        let ratio = sigma_out / sigma_in;
        estimates.push(ratio * ratio * fs / 2.0);
    }
    let n = trials as f64;
    let mean = estimates.iter().sum::<f64>() / n;
    let var = estimates
        .iter()
        .map(|e| (e - mean) * (e - mean))
        .sum::<f64>()
        / (n - 1.0);
    // rounding residue of an all-stop filter is not a bandwidth
    if mean <= 1e-12 * fs / 2.0 {
        return Ok(NepEstimate {
            value: 0.0,
            std_error: 0.0,
            trials,
            degenerate: true,
        });
    }
    Ok(NepEstimate {
        value: mean,
        std_error: libm::sqrt(var / n),
        trials,
        degenerate: false,
    })
}

/// `∫₀^{F_s/2} |H(f)|² df` by composite Simpson on `2^18` intervals.
pub fn integrated_nep(spec: &FilterSpec, fs: f64) -> Result<f64> {
    spec.validate(fs)?;
    if let FilterSpec::BrickWall { f_lo, f_hi } = *spec {
        return Ok(f_hi - f_lo);
    }
    let m = 1usize << 18;
    let h = fs / 2.0 / m as f64;
    let mut acc = 0.0;
    for i in 0..=m {
        let w = if i == 0 || i == m {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += w * spec.power_response(i as f64 * h, fs)?;
    }
    Ok(acc * h / 3.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    const FS: f64 = 400.0;

    #[test]
    fn single_pole() {
        // F_s ≫ f3db so bilinear warping is negligible
        let fs = 20_000.0;
        let e = nep_bandwidth(&FilterSpec::OnePole { f3db: 100.0 }, fs, 1 << 18, 10, 1).unwrap();
        let want = PI / 2.0 * 100.0;
        assert!((e.value / want - 1.0).abs() < 0.02, "{e:?}");
        assert!(e.std_error < 0.01 * e.value);
    }

    #[test]
    fn brick_wall_is_its_width() {
        let spec = FilterSpec::BrickWall {
            f_lo: 5.0,
            f_hi: 100.0,
        };
        let e = nep_bandwidth(&spec, FS, DEFAULT_NEP_SAMPLES, 10, 2).unwrap();
        assert!((e.value / 95.0 - 1.0).abs() < 0.01, "{e:?}");
    }

    #[test]
    fn identity_is_nyquist() {
        let e = nep_bandwidth(&FilterSpec::Identity, FS, 4096, 10, 3).unwrap();
        assert!((e.value / 200.0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn published_chain_monte_carlo_agrees_with_integral() {
        let spec = FilterSpec::Chain(FilterChain::published(FS), FilterMode::ZeroPhase);
        let exact = integrated_nep(&spec, FS).unwrap();
        let e = nep_bandwidth(&spec, FS, DEFAULT_NEP_SAMPLES, 10, 4).unwrap();
        assert!(e.std_error < 0.01 * e.value);
        assert!(
            (e.value - exact).abs() < 4.0 * e.std_error + 0.002 * exact,
            "{e:?} vs {exact}"
        );
        assert!((exact / 91.9 - 1.0).abs() < 0.05, "{exact}");
    }

    #[test]
    fn cascade_ratios_match_closed_form() {
        // ∫(1+(f/f_p)²)^(−n) df = f_p·B(1/2, n − 1/2)/2, f_p = f_c/√(2^(1/n)−1)
        let closed = [PI / 2.0, 1.2203, 1.1554, 1.1285, 1.1137];
        let fs = 2000.0 * 149.4;
        for (i, want) in closed.iter().enumerate() {
            let c = OnePoleCascade::new(149.4, i + 1).unwrap();
            let r = integrated_nep(&FilterSpec::Lockin(c), fs).unwrap() / 149.4;
            assert!((r - want).abs() < 3e-3, "order {}: {r}", i + 1);
        }
    }

    #[test]
    fn all_zero_filter_is_degenerate() {
        let chain = FilterChain {
            notches: vec![],
            bandpass: None,
        };
        // zero-width brick wall at a single bin edge passes nothing but DC,
        // which the estimator removes
        let spec = FilterSpec::BrickWall {
            f_lo: 0.0,
            f_hi: 1e-9,
        };
        let e = nep_bandwidth(&spec, FS, 1024, 3, 1).unwrap();
        assert!(e.degenerate);
        assert_eq!(e.value, 0.0);
        let id = nep_bandwidth(
            &FilterSpec::Chain(chain, FilterMode::Causal),
            FS,
            1024,
            3,
            1,
        )
        .unwrap();
        assert!(!id.degenerate);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(nep_bandwidth(&FilterSpec::Identity, FS, 8, 10, 0).is_err());
        assert!(nep_bandwidth(&FilterSpec::Identity, FS, 1024, 1, 0).is_err());
        let bw = FilterSpec::BrickWall {
            f_lo: 50.0,
            f_hi: 10.0,
        };
        assert!(nep_bandwidth(&bw, FS, 1024, 10, 0).is_err());
    }
}
