//! The reproduction table: every published headline number recomputed from
//! the configured operating point, each with a pinned tolerance.
//!
//! A criterion that errors becomes a failed row; the rest still run.

use std::fmt;

use serde::Serialize;

use nvmag_core::dsp::apply_filter_chain_with;
use nvmag_core::dsp::{asd, integrated_nep, nep_bandwidth, FilterSpec};
use nvmag_core::fitting::fit_odmr_spectrum;
use nvmag_core::noise::{
    equivalent_photocurrent, field_noise_floor, fit_noise_model, reduction_rate,
    shot_noise_density, NoiseDatum, NoiseFitOptions,
};
use nvmag_core::odmr::{synthetic_spectrum, three_tone_peaks};
use nvmag_core::rng::{derive_seed, NoiseRng};
use nvmag_core::stability::{
    default_taus, loglog_slope, min_detectable_field, overlapping_adev, sensitivity,
    sensitivity_from_std,
};
use nvmag_core::synth::synthesize;
use nvmag_core::{TimeTrace, Units};

use crate::config::{RunConfig, SynthSection};
use crate::error::Result;

/// Relative tolerance on the shot-noise-limited field floor.
pub const SHOT_FLOOR_TOL: f64 = 0.02;
pub const REDUCTION_RATE_TOL: f64 = 0.02;
pub const SHOT_MAGNITUDE_TOL: f64 = 0.03;
/// "Exactly" for a ratio of two decimal inputs.
pub const EXACT_TOL: f64 = 1e-12;
pub const EQUIV_UNCERTAINTY_RANGE: (f64, f64) = (1.2, 2.0);
/// Absolute, pT/√Hz.
pub const SENSITIVITY_IDENTITY_TOL: f64 = 0.1;
pub const ETA_RANGE: (f64, f64) = (8.5, 10.5);
pub const SIGMA_RANGE: (f64, f64) = (115.0, 141.0);
pub const END_TO_END_SEEDS: u64 = 10;
pub const SINGLE_POLE_TOL: f64 = 0.02;
pub const SINGLE_POLE_F3DB: f64 = 20.0;
pub const SINGLE_POLE_FS: f64 = 20_000.0;
pub const SINGLE_POLE_SAMPLES: usize = 1 << 20;
pub const SINGLE_POLE_TRIALS: usize = 20;
pub const BRICK_WALL_TOL: f64 = 0.01;
pub const CHAIN_NEP_TOL: f64 = 0.05;
pub const FWHM_TOL: f64 = 0.03;
pub const CENTRAL_SLOPE_TOL: f64 = 0.02;
/// Absolute, on the log-log slope.
pub const ADEV_SLOPE_TOL: f64 = 0.02;
pub const ADEV_1S_TOL: f64 = 0.10;
/// Absolute, pT.
pub const MIN_FIELD_TOL: f64 = 0.02;
pub const ORACLE_ADEV_TOL: f64 = 1e-10;
pub const PARSEVAL_TOL: f64 = 1e-6;
pub const NOISE_FIT_TOL: f64 = 1e-6;
pub const COVERAGE_MIN: f64 = 0.99;
pub const COVERAGE_TRIALS: usize = 1000;

const PT: f64 = 1e-12;
const NA: f64 = 1e-9;
const MA: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Check {
    Relative { tol: f64 },
    Absolute { tol: f64 },
    Range { lo: f64, hi: f64 },
    AtLeast { min: f64 },
}

impl Check {
    fn passes(&self, expected: f64, value: f64) -> bool {
        match *self {
            Check::Relative { tol } => ((value - expected) / expected).abs() <= tol,
            Check::Absolute { tol } => (value - expected).abs() <= tol,
            Check::Range { lo, hi } => (lo..=hi).contains(&value),
            Check::AtLeast { min } => value >= min,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Check::Relative { tol } => write!(f, "±{}%", short(tol * 100.0, 4)),
            Check::Absolute { tol } => write!(f, "±{}", short(tol, 4)),
            Check::Range { lo, hi } => write!(f, "[{}, {}]", short(lo, 4), short(hi, 4)),
            Check::AtLeast { min } => write!(f, "≥ {}", short(min, 4)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReproRow {
    pub id: String,
    pub quantity: String,
    pub unit: String,
    pub expected: f64,
    /// `None` when the computation itself failed.
    pub computed: Option<f64>,
    pub check: Check,
    pub pass: bool,
    pub note: Option<String>,
}

impl ReproRow {
    pub fn new(
        id: &str,
        quantity: &str,
        unit: &str,
        expected: f64,
        computed: f64,
        check: Check,
    ) -> Self {
        Self {
            id: id.into(),
            quantity: quantity.into(),
            unit: unit.into(),
            expected,
            computed: Some(computed),
            check,
            pass: computed.is_finite() && check.passes(expected, computed),
            note: None,
        }
    }

    fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    fn failed(id: &str, quantity: &str, error: String) -> Self {
        Self {
            id: id.into(),
            quantity: quantity.into(),
            unit: String::new(),
            expected: f64::NAN,
            computed: None,
            check: Check::Absolute { tol: 0.0 },
            pass: false,
            note: Some(error),
        }
    }
}

/// Fixed notation with trailing zeros dropped; scientific for very small or
/// very large magnitudes.
fn short(v: f64, decimals: usize) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e6).contains(&a) {
        return format!("{v:.2e}");
    }
    let s = format!("{v:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

impl fmt::Display for ReproRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.pass { "PASS" } else { "FAIL" };
        let computed = self.computed.map_or("error".to_string(), |v| short(v, 5));
        write!(
            f,
            "[{status}] {:<4} {:<46} expected {:<10} {:<14} computed {computed} {}",
            self.id,
            self.quantity,
            short(self.expected, 4),
            self.check.to_string(),
            self.unit
        )?;
        if let Some(n) = &self.note {
            write!(f, "  ({n})")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReproReport {
    pub rows: Vec<ReproRow>,
    pub pass: bool,
}

impl ReproReport {
    pub fn from_rows(rows: Vec<ReproRow>) -> Self {
        let pass = rows.iter().all(|r| r.pass);
        Self { rows, pass }
    }

    pub fn n_failed(&self) -> usize {
        self.rows.iter().filter(|r| !r.pass).count()
    }
}

impl fmt::Display for ReproReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rows {
            writeln!(f, "{r}")?;
        }
        write!(
            f,
            "overall: {} ({} of {} rows pass)",
            if self.pass { "PASS" } else { "FAIL" },
            self.rows.len() - self.n_failed(),
            self.rows.len()
        )
    }
}

type Criterion = fn(&RunConfig) -> Result<Vec<ReproRow>>;

/// `(id, description, runner)` for every criterion, in table order.
pub const CRITERIA: [(&str, &str, Criterion); 12] = [
    ("1", "shot-noise-limited field noise", shot_floor),
    ("2", "balanced-detection reduction rate", balanced_reduction),
    ("3", "shot-noise magnitudes at 25 mA", shot_magnitudes),
    ("4", "equivalent photocurrent", equivalent_current),
    ("5", "sensitivity identity", sensitivity_identity),
    ("6", "end-to-end synthetic sensitivity", end_to_end),
    ("7", "NEP bandwidth estimator", nep_checks),
    ("8", "ODMR fit round trip", odmr_round_trip),
    ("9", "Allan deviation white-noise law", adev_white_law),
    ("10", "minimum detectable field", min_field),
    ("11", "oracle equivalence", oracles),
    ("12", "noise-model fit recovery", noise_fit_recovery),
];

pub fn run(config: &RunConfig) -> ReproReport {
    let mut rows = Vec::new();
    for (id, name, f) in CRITERIA {
        log::info!("criterion {id}: {name}");
        match f(config) {
            Ok(r) => rows.extend(r),
            Err(e) => rows.push(ReproRow::failed(id, name, e.to_string())),
        }
    }
    ReproReport::from_rows(rows)
}

pub fn shot_floor(config: &RunConfig) -> Result<Vec<ReproRow>> {
    let s = config.sensor.to_sensor()?;
    let n = shot_noise_density(s.fl_photocurrent, true)?;
    let floor = field_noise_floor(n, s.zero_crossing_slope, s.gyromagnetic_ratio)?;
    Ok(vec![ReproRow::new(
        "1",
        "shot-noise-limited field noise",
        "pT/√Hz",
        6.9,
        floor / PT,
        Check::Relative {
            tol: SHOT_FLOOR_TOL,
        },
    )])
}

pub fn balanced_reduction(_: &RunConfig) -> Result<Vec<ReproRow>> {
    let r = reduction_rate(3.0 * NA, 1.6 * NA, 130.0 * NA, 1.2 * NA)?;
    Ok(vec![ReproRow::new(
        "2",
        "balanced-detection reduction rate",
        "",
        1.9e-2,
        r,
        Check::Relative {
            tol: REDUCTION_RATE_TOL,
        },
    )
    .with_note(
        "inputs are the rounded published noise magnitudes",
    )])
}

pub fn shot_magnitudes(config: &RunConfig) -> Result<Vec<ReproRow>> {
    let bw = config.sensor.to_sensor()?.lockin_nep_bw.sqrt();
    let i = 25.0 * MA;
    let check = Check::Relative {
        tol: SHOT_MAGNITUDE_TOL,
    };
    Ok(vec![
        ReproRow::new(
            "3a",
            "shot noise at 25 mA, balanced",
            "nA",
            1.6,
            shot_noise_density(i, true)? * bw / NA,
            check,
        ),
        ReproRow::new(
            "3b",
            "shot noise at 25 mA, single detector",
            "nA",
            1.2,
            shot_noise_density(i, false)? * bw / NA,
            check,
        ),
    ])
}

pub fn equivalent_current(config: &RunConfig) -> Result<Vec<ReproRow>> {
    let (value, unc) = equivalent_photocurrent(&config.budget.to_budget()?)?;
    let (lo, hi) = EQUIV_UNCERTAINTY_RANGE;
    Ok(vec![
        ReproRow::new(
            "4a",
            "equivalent photocurrent p1/p2",
            "mA",
            10.0,
            value / MA,
            Check::Relative { tol: EXACT_TOL },
        ),
        ReproRow::new(
            "4b",
            "equivalent photocurrent uncertainty",
            "mA",
            1.6,
            unc / MA,
            Check::Range { lo, hi },
        ),
    ])
}

pub fn sensitivity_identity(_: &RunConfig) -> Result<Vec<ReproRow>> {
    let eta = sensitivity_from_std(128.0 * PT, 91.9);
    Ok(vec![ReproRow::new(
        "5",
        "sensitivity from 128 pT in 91.9 Hz",
        "pT/√Hz",
        9.4,
        eta / PT,
        Check::Absolute {
            tol: SENSITIVITY_IDENTITY_TOL,
        },
    )])
}

/// Synthesize, filter with the configured chain and divide by the chain's
/// own NEP bandwidth, once per derived seed. The rows report the seed that
/// lies furthest outside the band (the mean when all are inside).
pub fn end_to_end(config: &RunConfig) -> Result<Vec<ReproRow>> {
    let mut cfg = config.clone();
    if cfg.synth.is_none() {
        cfg.synth = Some(SynthSection::default());
    }
    let fs = cfg.sensor.sampling_frequency_hz;
    let (chain, mode) = cfg.filters.to_chain(fs)?;
    let f_nep = integrated_nep(&FilterSpec::Chain(chain.clone(), mode), fs)?;
    let (mut etas, mut sigmas) = (Vec::new(), Vec::new());
    for k in 0..END_TO_END_SEEDS {
        cfg.seed = derive_seed(config.seed, k);
        let trace = synthesize(&cfg.synth_spec()?)?;
        let filtered = apply_filter_chain_with(&trace, &chain, mode)?;
        let rep = sensitivity(&filtered, f_nep)?;
        etas.push(rep.eta / PT);
        sigmas.push(rep.trace_std / PT);
    }
    let worst = |v: &[f64], (lo, hi): (f64, f64)| {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        v.iter()
            .copied()
            .filter(|x| !(lo..=hi).contains(x))
            .max_by(|a, b| {
                let d = |x: f64| (x - lo).min(0.0).abs().max(x - hi);
                d(*a).total_cmp(&d(*b))
            })
            .unwrap_or(mean)
    };
    let span = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        format!(
            "{} seeds span [{lo:.3}, {hi:.3}], chain NEP {f_nep:.2} Hz",
            v.len()
        )
    };
    let (elo, ehi) = ETA_RANGE;
    let (slo, shi) = SIGMA_RANGE;
    Ok(vec![
        ReproRow::new(
            "6a",
            "synthetic sensitivity η, all seeds",
            "pT/√Hz",
            9.4,
            worst(&etas, ETA_RANGE),
            Check::Range { lo: elo, hi: ehi },
        )
        .with_note(span(&etas)),
        ReproRow::new(
            "6b",
            "synthetic filtered σ, all seeds",
            "pT",
            128.0,
            worst(&sigmas, SIGMA_RANGE),
            Check::Range { lo: slo, hi: shi },
        )
        .with_note(span(&sigmas)),
    ])
}

pub fn nep_checks(config: &RunConfig) -> Result<Vec<ReproRow>> {
    let a = &config.analysis;
    let fs = config.sensor.sampling_frequency_hz;
    let est = |spec: &FilterSpec, fs: f64, k: u64| {
        nep_bandwidth(
            spec,
            fs,
            a.nep_samples,
            a.nep_trials,
            derive_seed(config.seed, 100 + k),
        )
    };
    // Bilinear warping lowers a digital pole's NEP by 1/(1 + π·f3db/F_s), so the
    // analog value needs f3db ≪ F_s; the longer record keeps the estimate tight.
    let (f3db, pole_fs) = (SINGLE_POLE_F3DB, SINGLE_POLE_FS);
    let one_pole = nep_bandwidth(
        &FilterSpec::OnePole { f3db },
        pole_fs,
        SINGLE_POLE_SAMPLES,
        SINGLE_POLE_TRIALS,
        derive_seed(config.seed, 100),
    )?;
    let brick = est(
        &FilterSpec::BrickWall {
            f_lo: 5.0,
            f_hi: 100.0,
        },
        fs,
        1,
    )?;
    let (chain, mode) = config.filters.to_chain(fs)?;
    let chain_nep = est(&FilterSpec::Chain(chain, mode), fs, 2)?;
    let note = |e: &nvmag_core::dsp::NepEstimate| format!("± {:.3} Hz standard error", e.std_error);
    Ok(vec![
        ReproRow::new(
            "7a",
            "NEP of a 20-Hz single pole at 20 kHz",
            "Hz",
            std::f64::consts::FRAC_PI_2 * f3db,
            one_pole.value,
            Check::Relative {
                tol: SINGLE_POLE_TOL,
            },
        )
        .with_note(note(&one_pole)),
        ReproRow::new(
            "7b",
            "NEP of a 5–100 Hz brick wall",
            "Hz",
            95.0,
            brick.value,
            Check::Relative {
                tol: BRICK_WALL_TOL,
            },
        )
        .with_note(note(&brick)),
        ReproRow::new(
            "7c",
            "NEP of the notch and band-pass chain",
            "Hz",
            91.9,
            chain_nep.value,
            Check::Relative { tol: CHAIN_NEP_TOL },
        )
        .with_note(note(&chain_nep)),
    ])
}

pub fn odmr_round_trip(config: &RunConfig) -> Result<Vec<ReproRow>> {
    let o = &config.odmr;
    let splitting = config.sensor.hyperfine_splitting_hz;
    let peaks = three_tone_peaks(splitting, o.fwhm_hz, o.central_slope_a_per_hz)?;
    let data = synthetic_spectrum(
        &peaks,
        o.half_span_hz,
        o.n_points,
        o.rel_noise,
        derive_seed(config.seed, 200),
    )?;
    let fit = fit_odmr_spectrum(&data, splitting, &o.fit_options())?;
    let central = &fit.peaks[2];
    Ok(vec![
        ReproRow::new(
            "8a",
            "fitted linewidth Γ",
            "MHz",
            0.48,
            central.fwhm / 1e6,
            Check::Relative { tol: FWHM_TOL },
        ),
        ReproRow::new(
            "8b",
            "fitted central zero-crossing slope",
            "pA/Hz",
            324.0,
            fit.central_slope() / PT,
            Check::Relative {
                tol: CENTRAL_SLOPE_TOL,
            },
        ),
    ])
}

/// White field noise with one-sided density √2·η, so that η = δB/√(2 f_NEP)
/// and ADEV(τ) = η/√τ.
pub fn white_field_trace(eta: f64, fs: f64, duration: f64, seed: u64) -> Result<TimeTrace> {
    let n = (duration * fs).round() as usize;
    let mut x = vec![0.0; n];
    NoiseRng::seeded(seed).fill_normal(&mut x, eta * fs.sqrt());
    Ok(TimeTrace::new(x, fs, Units::Tesla)?)
}

pub fn adev_white_law(config: &RunConfig) -> Result<Vec<ReproRow>> {
    let fs = config.sensor.sampling_frequency_hz;
    let eta = 9.4 * PT;
    let trace = white_field_trace(eta, fs, 200.0 * 60.0, derive_seed(config.seed, 300))?;
    // ten per decade from 0.1 s, whole samples at any rate that makes 0.1 s whole
    let mut taus: Vec<f64> = (0..=30)
        .map(|k| (0.1 * fs * 10f64.powf(k as f64 / 10.0)).round() / fs)
        .collect();
    taus.dedup();
    let report = overlapping_adev(&trace, &taus)?;
    let slope = loglog_slope(&report.points, 0.1, 100.0)?;
    let at_1s = report
        .points
        .iter()
        .find(|p| (p.tau - 1.0).abs() < 1e-9)
        .map(|p| p.adev)
        .unwrap_or(f64::NAN);
    Ok(vec![
        ReproRow::new(
            "9a",
            "ADEV log-log slope over 0.1–100 s",
            "",
            -0.5,
            slope,
            Check::Absolute {
                tol: ADEV_SLOPE_TOL,
            },
        ),
        ReproRow::new(
            "9b",
            "ADEV at 1 s for η = 9.4 pT/√Hz",
            "pT",
            9.4,
            at_1s / PT,
            Check::Relative { tol: ADEV_1S_TOL },
        )
        .with_note("the instrument measured 8.5 pT at 1 s"),
    ])
}

pub fn min_field(_: &RunConfig) -> Result<Vec<ReproRow>> {
    Ok(vec![ReproRow::new(
        "10",
        "minimum detectable field at 1000 s",
        "pT",
        0.30,
        min_detectable_field(9.4 * PT, 1000.0) / PT,
        Check::Absolute { tol: MIN_FIELD_TOL },
    )])
}

/// Definitional overlapping Allan deviation with explicit window means.
pub fn brute_force_adev(x: &[f64], m: usize) -> f64 {
    let n = x.len();
    let means: Vec<f64> = (0..=n - m)
        .map(|k| x[k..k + m].iter().sum::<f64>() / m as f64)
        .collect();
    let terms = n - 2 * m + 1;
    let s: f64 = (0..terms).map(|k| (means[k + m] - means[k]).powi(2)).sum();
    (s / (2.0 * terms as f64)).sqrt()
}

pub fn oracles(config: &RunConfig) -> Result<Vec<ReproRow>> {
    let fs = 400.0;
    let lengths = [1000usize, 999, 512, 777, 300, 64, 450, 1000, 873, 129];
    let (mut adev_err, mut parseval_err) = (0.0f64, 0.0f64);
    for (k, &n) in lengths.iter().enumerate() {
        let mut x = vec![0.0; n];
        let mut rng = NoiseRng::seeded(derive_seed(config.seed, 400 + k as u64));
        rng.fill_normal(&mut x, 1.0);
        // a random walk component keeps the test away from pure white noise
        let mut acc = 0.0;
        for v in &mut x {
            acc += 0.1 * rng.normal();
            *v += acc + 3.0;
        }
        let trace = TimeTrace::new(x.clone(), fs, Units::Tesla)?;
        let taus = default_taus(n, fs);
        for p in overlapping_adev(&trace, &taus)?.points {
            let m = (p.tau * fs).round() as usize;
            let want = brute_force_adev(&x, m);
            adev_err = adev_err.max(((p.adev - want) / want).abs());
        }
        let spec = asd(&trace, n, 1)?;
        let mean = x.iter().sum::<f64>() / n as f64;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        parseval_err = parseval_err.max((spec.total_power() / var - 1.0).abs());
    }
    Ok(vec![
        ReproRow::new(
            "11a",
            "overlapping ADEV vs definitional sum, max rel. error",
            "",
            0.0,
            adev_err,
            Check::Absolute {
                tol: ORACLE_ADEV_TOL,
            },
        ),
        ReproRow::new(
            "11b",
            "ASD Parseval, max rel. error",
            "",
            0.0,
            parseval_err,
            Check::Absolute { tol: PARSEVAL_TOL },
        ),
    ])
}

/// Twenty photocurrents from 1.5 to 30 mA, like the published sweep.
pub fn sweep_currents() -> Vec<f64> {
    (1..=20).map(|k| 1.5e-3 * k as f64).collect()
}

pub fn noise_fit_recovery(config: &RunConfig) -> Result<Vec<ReproRow>> {
    let budget = config.budget.to_budget()?;
    let opts = NoiseFitOptions::default();
    let clean: Vec<NoiseDatum> = sweep_currents()
        .into_iter()
        .map(|i| NoiseDatum::new(i, budget.density(i)))
        .collect();
    let fit = fit_noise_model(&clean, budget.n_elec, &opts)?;
    let rel = ((fit.budget.p1 - budget.p1) / budget.p1)
        .abs()
        .max(((fit.budget.p2 - budget.p2) / budget.p2).abs());

    let mut rng = NoiseRng::seeded(derive_seed(config.seed, 500));
    let (mut cover1, mut cover2) = (0usize, 0usize);
    for _ in 0..COVERAGE_TRIALS {
        let noisy: Vec<NoiseDatum> = clean
            .iter()
            .map(|d| NoiseDatum::new(d.i_fl, d.n_far * (1.0 + 0.05 * rng.normal())))
            .collect();
        let f = fit_noise_model(&noisy, budget.n_elec, &opts)?;
        let se = f
            .result
            .std_errors()
            .ok_or_else(|| nvmag_core::Error::FitFailure("no covariance".into()))?;
        cover1 += usize::from((f.budget.p1 - budget.p1).abs() <= 3.0 * se[0]);
        cover2 += usize::from((f.budget.p2 - budget.p2).abs() <= 3.0 * se[1]);
    }
    let frac = |c: usize| c as f64 / COVERAGE_TRIALS as f64;
    let cov = Check::AtLeast { min: COVERAGE_MIN };
    Ok(vec![
        ReproRow::new(
            "12a",
            "noiseless fit, max rel. error of p1, p2",
            "",
            0.0,
            rel,
            Check::Absolute { tol: NOISE_FIT_TOL },
        ),
        ReproRow::new(
            "12b",
            "3σ coverage of p1 with 5% noise",
            "",
            0.9973,
            frac(cover1),
            cov,
        ),
        ReproRow::new(
            "12c",
            "3σ coverage of p2 with 5% noise",
            "",
            0.9973,
            frac(cover2),
            cov,
        ),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checks() {
        assert!(Check::Relative { tol: 0.02 }.passes(6.9, 7.0));
        assert!(!Check::Relative { tol: 0.01 }.passes(6.9, 7.0));
        assert!(Check::Range { lo: 1.0, hi: 2.0 }.passes(0.0, 2.0));
        assert!(!Check::AtLeast { min: 0.99 }.passes(0.0, 0.98));
        assert!(!ReproRow::new("x", "", "", 1.0, f64::NAN, Check::AtLeast { min: 0.0 }).pass);
    }

    #[test]
    fn overall_requires_every_row() {
        let ok = ReproRow::new("a", "", "", 1.0, 1.0, Check::Absolute { tol: 0.0 });
        let bad = ReproRow::failed("b", "", "boom".into());
        assert!(ReproReport::from_rows(vec![ok.clone()]).pass);
        assert!(!ReproReport::from_rows(vec![ok, bad]).pass);
    }

    #[test]
    fn brute_force_known_values() {
        // alternating ±1: every window of even length averages to zero
        let x: Vec<f64> = (0..10)
            .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        assert_eq!(brute_force_adev(&x, 2), 0.0);
        assert!((brute_force_adev(&x, 1) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn slope_perturbation_fails_floor_row() {
        let mut c = RunConfig::published();
        assert!(shot_floor(&c).unwrap()[0].pass);
        c.sensor.zero_crossing_slope_a_per_hz *= 1.1;
        assert!(!shot_floor(&c).unwrap()[0].pass);
    }

    #[test]
    fn stage_errors_become_failed_rows() {
        let mut c = RunConfig::published();
        c.sensor.gyromagnetic_ratio_hz_per_t = -1.0;
        let r = run(&c);
        let row = r.rows.iter().find(|r| r.id == "1").unwrap();
        assert!(!row.pass && row.computed.is_none());
        assert!(r.rows.len() >= 10);
    }
}
