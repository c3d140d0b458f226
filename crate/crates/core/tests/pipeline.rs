//! Cross-module flows through the public API, each checked against an
//! analytic expectation that does not reuse the code under test.

use std::f64::consts::PI;

use nvmag_core::dsp::{
    apply_filter_chain_with, asd, integrated_nep, FilterChain, FilterMode, FilterSpec,
};
use nvmag_core::fitting::{fit_odmr_spectrum, fit_zero_crossing, OdmrFitOptions};
use nvmag_core::noise::{
    equivalent_photocurrent, fit_noise_model, NoiseBudget, NoiseDatum, NoiseFitOptions,
};
use nvmag_core::odmr::{synthetic_spectrum, three_tone_peaks};
use nvmag_core::stability::{overlapping_adev, sensitivity};
use nvmag_core::synth::{synthesize, SynthSpec, Tone};

const GAMMA: f64 = 28.0e9;
const SLOPE: f64 = 332e-12;
const I_FL: f64 = 6.4e-3;

/// One-sided field density of the published budget at the operating point,
/// written out from the three noise terms.
fn budget_field_density() -> f64 {
    let n2 = 20e-12f64.powi(2) + 5.0e-19 * I_FL + 5.0e-17 * I_FL * I_FL;
    n2.sqrt() / (GAMMA * SLOPE)
}

#[test]
fn injected_tone_amplitude_survives_synthesis() {
    let mut spec = SynthSpec::published(10.0, 3).unwrap();
    let (f0, a) = (40.0, 1e-9);
    spec.injected_signals.push(Tone::new(f0, a, 0.3));
    let trace = synthesize(&spec).unwrap();
    let s = asd(&trace, 4000, 1).unwrap();
    let k = (f0 / s.resolution_bw).round() as usize;
    assert_eq!(s.peak().0, f0);
    let amp = s.density[k] * (2.0 * s.resolution_bw).sqrt();
    // fourth-order lock-in at 149.4 Hz and the ×8 boxcar, from their formulas
    let c = 2f64.powf(0.25) - 1.0;
    let lockin = (1.0 + c * (f0 / 149.4f64).powi(2)).powf(-2.0);
    let x = PI * f0 / 3200.0;
    let boxcar = (8.0 * x).sin() / (8.0 * x.sin());
    assert!((amp / (a * lockin * boxcar) - 1.0).abs() < 0.02, "{amp}");
}

#[test]
fn filtered_sensitivity_matches_white_budget() {
    let chain = FilterChain::published(400.0);
    let f_nep = integrated_nep(
        &FilterSpec::Chain(chain.clone(), FilterMode::ZeroPhase),
        400.0,
    )
    .unwrap();
    let mut etas = Vec::new();
    for seed in 0..10 {
        let trace = synthesize(&SynthSpec::published(5.0, seed).unwrap()).unwrap();
        let filtered = apply_filter_chain_with(&trace, &chain, FilterMode::ZeroPhase).unwrap();
        etas.push(sensitivity(&filtered, f_nep).unwrap().eta);
    }
    let mean = etas.iter().sum::<f64>() / etas.len() as f64;
    // white noise: δB = S·√f_NEP so η = S/√2, less the few-percent roll-off
    // of the lock-in and boxcar inside the 5–100 Hz band
    let want = budget_field_density() / 2f64.sqrt();
    let r = mean / want;
    assert!((0.88..1.0).contains(&r), "ratio {r}");
}

#[test]
fn allan_deviation_of_unfiltered_synthesis() {
    let mut spec = SynthSpec::published(1200.0, 5).unwrap();
    spec.lockin_order = None;
    let trace = synthesize(&spec).unwrap();
    let rep = overlapping_adev(&trace, &[1.0, 10.0]).unwrap();
    // ADEV(τ) = √(S²/(2τ)) for one-sided white density S
    let want = budget_field_density() / 2f64.sqrt();
    assert!((rep.points[0].adev / want - 1.0).abs() < 0.1);
    assert!((rep.points[1].adev / (want / 10f64.sqrt()) - 1.0).abs() < 0.25);
}

#[test]
fn odmr_fit_then_zero_crossing_regression() {
    let peaks = three_tone_peaks(2.16e6, 0.48e6, 324e-12).unwrap();
    let data = synthetic_spectrum(&peaks, 8e6, 1601, 0.0, 0).unwrap();
    let fit = fit_odmr_spectrum(&data, 2.16e6, &OdmrFitOptions::default()).unwrap();
    assert!((fit.central_slope() / 324e-12 - 1.0).abs() < 1e-6);
    assert!((fit.peaks[2].fwhm / 0.48e6 - 1.0).abs() < 1e-6);
    // on a symmetric grid the regression slope is Σxy/Σx²; the cubic term of
    // the line shape pulls it about 1% below the tangent
    let w = 24e3;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in data.detunings().iter().zip(data.demod_current()) {
        if x.abs() <= w {
            sxy += x * y;
            sxx += x * x;
        }
    }
    let z = fit_zero_crossing(&data, w).unwrap();
    assert!((z.slope / (sxy / sxx) - 1.0).abs() < 1e-9);
    assert!((z.slope / 324e-12 - 1.0).abs() < 0.02, "{}", z.slope);
    assert!(z.zero_crossing().abs() < 1.0);
}

#[test]
fn noise_fit_feeds_equivalent_current() {
    let b = NoiseBudget::published();
    let data: Vec<NoiseDatum> = (1..=12)
        .map(|k| {
            let i = 2.5e-3 * k as f64;
            NoiseDatum::new(i, (4e-22 + 5.0e-19 * i + 5.0e-17 * i * i).sqrt())
        })
        .collect();
    let fit = fit_noise_model(&data, b.n_elec, &NoiseFitOptions::default()).unwrap();
    let (i_eq, _) = equivalent_photocurrent(&fit.budget).unwrap();
    assert!((i_eq / 10e-3 - 1.0).abs() < 1e-6);
}
