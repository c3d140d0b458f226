//! Sensitivity and long-term stability of a field trace.

use alloc::vec::Vec;

use crate::dsp::filter::{apply_filter_chain, FilterChain};
use crate::error::{Error, Result};
use crate::trace::TimeTrace;

/// Frequency of the slow fluctuation seen in the long-term record (Hz).
pub const DRIFT_COMPONENT_FREQUENCY: f64 = 0.025;
/// Quality factor of the optional notch that removes it.
pub const DRIFT_NOTCH_Q: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityReport {
    /// T/√Hz.
    pub eta: f64,
    /// Sample standard deviation δB (T).
    pub trace_std: f64,
    pub f_nep: f64,
    /// Pass band the trace was filtered to, if known.
    pub band: Option<(f64, f64)>,
}

/// η = δB/√(2·f_NEP) with δB the sample standard deviation of a trace
/// already band-limited to `f_nep`.
pub fn sensitivity(trace: &TimeTrace, f_nep: f64) -> Result<SensitivityReport> {
    if !(f_nep > 0.0 && f_nep.is_finite()) {
        return Err(Error::invalid(alloc::format!(
            "NEP bandwidth must be positive, got {f_nep}"
        )));
    }
    let trace_std = trace.std_dev();
    Ok(SensitivityReport {
        eta: sensitivity_from_std(trace_std, f_nep),
        trace_std,
        f_nep,
        band: None,
    })
}

pub fn sensitivity_from_std(trace_std: f64, f_nep: f64) -> f64 {
    trace_std / libm::sqrt(2.0 * f_nep)
}

/// Smallest field resolved after averaging for `t` seconds, η/√T.
pub fn min_detectable_field(eta: f64, t: f64) -> f64 {
    eta / libm::sqrt(t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdevPoint {
    pub tau: f64,
    pub adev: f64,
    /// adev/√n_pairs.
    pub std_error: f64,
    /// Non-overlapped pair count ⌊N/(2m)⌋.
    pub n_pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AdevReport {
    pub points: Vec<AdevPoint>,
    /// Requested τ values the trace is too short for.
    pub skipped: Vec<f64>,
}

/// Averaging factor for `tau`; `tau` must be a whole number of samples.
fn averaging_factor(tau: f64, fs: f64) -> Result<usize> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::invalid(alloc::format!(
            "tau must be positive, got {tau}"
        )));
    }
    let m = libm::round(tau * fs);
    if m < 1.0 || libm::fabs(m - tau * fs) > 1e-6 * m {
        return Err(Error::invalid(alloc::format!(
            "tau {tau} s is not a multiple of the sample interval {} s",
            1.0 / fs
        )));
    }
    Ok(m as usize)
}

/// Overlapping Allan deviation
/// `σ²(τ) = Σ_k (ȳ_{k+m} − ȳ_k)² / (2(N − 2m + 1))`, τ = m/F_s, evaluated
/// through a running sum of the mean-removed samples.
pub fn overlapping_adev(trace: &TimeTrace, taus: &[f64]) -> Result<AdevReport> {
    let fs = trace.sampling_frequency();
    let x = trace.samples();
    let n = x.len();
    let m0 = trace.mean();
    let mut cum = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    cum.push(0.0);
    for v in x {
        acc += v - m0;
        cum.push(acc);
    }
    let mut report = AdevReport::default();
    for &tau in taus {
        let m = averaging_factor(tau, fs)?;
        if 2 * m > n {
            report.skipped.push(tau);
            continue;
        }
        let terms = n - 2 * m + 1;
        let mf = m as f64;
        let ss: f64 = (0..terms)
            .map(|k| {
                let d = (cum[k + 2 * m] - 2.0 * cum[k + m] + cum[k]) / mf;
                d * d
            })
            .sum();
        let adev = libm::sqrt(ss / (2.0 * terms as f64));
        let n_pairs = n / (2 * m);
        report.points.push(AdevPoint {
            tau: mf / fs,
            adev,
            std_error: adev / libm::sqrt(n_pairs as f64),
            n_pairs,
        });
    }
    Ok(report)
}

/// About ten logarithmically spaced τ per decade from `1/F_s` to
/// `N/(2F_s)`, rounded to whole samples.
pub fn default_taus(n_samples: usize, fs: f64) -> Vec<f64> {
    let m_max = n_samples / 2;
    if m_max == 0 {
        return Vec::new();
    }
    let decades = libm::log10(m_max as f64);
    let steps = libm::ceil(decades * 10.0) as usize;
    let mut ms: Vec<usize> = (0..=steps)
        .map(|i| libm::round(libm::pow(10.0, i as f64 / 10.0)) as usize)
        .filter(|&m| m < m_max)
        .collect();
    ms.push(m_max);
    ms.dedup();
    ms.into_iter().map(|m| m as f64 / fs).collect()
}

/// Zero-phase notch removing the slow `DRIFT_COMPONENT_FREQUENCY`
/// fluctuation before the Allan analysis.
pub fn remove_drift_component(trace: &TimeTrace) -> Result<TimeTrace> {
    let chain = FilterChain {
        notches: alloc::vec![(DRIFT_COMPONENT_FREQUENCY, DRIFT_NOTCH_Q)],
        bandpass: None,
    };
    apply_filter_chain(trace, &chain)
}

/// Least-squares slope of log(adev) against log(τ) over points with
/// `tau_lo ≤ τ ≤ tau_hi`.
pub fn loglog_slope(points: &[AdevPoint], tau_lo: f64, tau_hi: f64) -> Result<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.tau >= tau_lo && p.tau <= tau_hi && p.adev > 0.0)
        .map(|p| (libm::log(p.tau), libm::log(p.adev)))
        .collect();
    if pts.len() < 2 {
        return Err(Error::invalid(
            "need two positive ADEV points in the τ range",
        ));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Ok(sxy / sxx)
}
