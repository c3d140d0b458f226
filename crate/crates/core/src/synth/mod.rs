//! Synthetic demodulated magnetometer traces.
//!
//! The generator works at baseband: white current noise from the budget is
//! drawn at `OVERSAMPLE × F_s`, converted to field through γ_e·slope, summed
//! with the deterministic field terms, passed through the lock-in output
//! filter, block-averaged down to `F_s` and optionally closed in the servo
//! loop.

mod lockin;
mod servo;

pub use lockin::{apply_lockin_lpf, calibrate_order, cascade_nep_ratio, MAX_LOCKIN_ORDER};
pub use servo::{servo_lock, DEFAULT_LOOP_BANDWIDTH, DEFAULT_SERVO_LPF};

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::dsp::fft;
use crate::dsp::filter::{filter_samples, settle_length, FilterMode, OnePoleCascade};
use crate::error::{Error, Result};
use crate::noise::NoiseBudget;
use crate::rng::{derive_seed, NoiseRng};
use crate::sensor::SensorConfig;
use crate::trace::{TimeTrace, Units};

/// Internal rate multiplier used to render the analog lock-in filter.
pub const OVERSAMPLE: usize = 8;

/// Sinusoidal field component `amplitude·sin(2πft + phase)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tone {
    pub frequency: f64,
    /// Tesla.
    pub amplitude: f64,
    pub phase: f64,
}

impl Tone {
    pub fn new(frequency: f64, amplitude: f64, phase: f64) -> Self {
        Self {
            frequency,
            amplitude,
            phase,
        }
    }

    fn at(&self, t: f64) -> f64 {
        self.amplitude * libm::sin(2.0 * PI * self.frequency * t + self.phase)
    }
}

/// Slow phenomenological drift `amplitude·sin(2πt/period)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Drift {
    pub period: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServoSpec {
    pub lpf_cutoff: f64,
    pub loop_bandwidth: f64,
}

impl Default for ServoSpec {
    fn default() -> Self {
        Self {
            lpf_cutoff: DEFAULT_SERVO_LPF,
            loop_bandwidth: DEFAULT_LOOP_BANDWIDTH,
        }
    }
}

/// Frequency-shaped intensity noise: the `p₂·I²` part of the budget gets
/// the power shape `1 + (corner/f)^exponent` instead of being white.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntensityShape {
    pub corner: f64,
    pub exponent: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub sensor: SensorConfig,
    pub budget: NoiseBudget,
    /// `(frequency Hz, amplitude T)`, added with zero phase.
    pub line_harmonics: Vec<(f64, f64)>,
    pub drift: Option<Drift>,
    pub injected_signals: Vec<Tone>,
    pub servo: Option<ServoSpec>,
    /// Seconds.
    pub duration: f64,
    pub seed: u64,
    /// One-pole cascade order of the lock-in output filter; `None` bypasses
    /// the filter.
    pub lockin_order: Option<usize>,
    pub intensity_shape: Option<IntensityShape>,
}

impl SynthSpec {
    /// Published operating point and noise budget, lock-in order calibrated
    /// to the published NEP/f3db ratio, no line pickup, drift or servo.
    pub fn published(duration: f64, seed: u64) -> Result<Self> {
        let sensor = SensorConfig::default();
        let order = calibrate_order(sensor.lockin_f3db, sensor.lockin_nep_bw)?;
        Ok(Self {
            sensor,
            budget: NoiseBudget::published(),
            line_harmonics: Vec::new(),
            drift: None,
            injected_signals: Vec::new(),
            servo: None,
            duration,
            seed,
            lockin_order: Some(order),
            intensity_shape: None,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.sensor.validate()?;
        self.budget.validate()?;
        let fs = self.sensor.sampling_frequency;
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::invalid("duration must be positive"));
        }
        if libm::round(self.duration * fs) < 1.0 {
            return Err(Error::invalid("duration shorter than one sample"));
        }
        let amplitudes = self
            .line_harmonics
            .iter()
            .map(|h| h.1)
            .chain(self.injected_signals.iter().map(|t| t.amplitude))
            .chain(self.drift.iter().map(|d| d.amplitude));
        for a in amplitudes {
            if !(a >= 0.0 && a.is_finite()) {
                return Err(Error::invalid("amplitudes must be nonnegative and finite"));
            }
        }
        for f in self
            .line_harmonics
            .iter()
            .map(|h| h.0)
            .chain(self.injected_signals.iter().map(|t| t.frequency))
        {
            if !(f >= 0.0 && f.is_finite()) {
                return Err(Error::invalid("tone frequencies must be nonnegative"));
            }
        }
        if self.injected_signals.iter().any(|t| !t.phase.is_finite()) {
            return Err(Error::invalid("tone phases must be finite"));
        }
        if let Some(d) = self.drift {
            if !(d.period > 0.0 && d.period.is_finite()) {
                return Err(Error::invalid("drift period must be positive"));
            }
        }
        if let Some(s) = self.intensity_shape {
            if !(s.corner >= 0.0
                && s.exponent >= 0.0
                && s.corner.is_finite()
                && s.exponent.is_finite())
            {
                return Err(Error::invalid("intensity shape must be nonnegative"));
            }
        }
        if let Some(order) = self.lockin_order {
            OnePoleCascade::new(self.sensor.lockin_f3db, order)?
                .sections(fs * OVERSAMPLE as f64)?;
        }
        if let Some(s) = self.servo {
            if !(s.loop_bandwidth > 0.0
                && s.loop_bandwidth < s.lpf_cutoff
                && s.lpf_cutoff < fs / 2.0)
            {
                return Err(Error::invalid(
                    "servo needs 0 < loop bandwidth < lpf cutoff < F_s/2",
                ));
            }
        }
        Ok(())
    }

    /// One-sided field noise density the budget implies before any
    /// filtering (T/√Hz).
    pub fn field_noise_density(&self) -> Result<f64> {
        let n = self.budget.density(self.sensor.fl_photocurrent);
        if n == 0.0 {
            return Ok(0.0);
        }
        let response = self.sensor.field_response();
        if response == 0.0 {
            return Err(Error::singular("zero field response with nonzero noise"));
        }
        Ok(n / libm::fabs(response))
    }

    fn deterministic_field(&self, t: f64) -> f64 {
        let mut v: f64 = self.injected_signals.iter().map(|s| s.at(t)).sum();
        v += self
            .line_harmonics
            .iter()
            .map(|&(f, a)| a * libm::sin(2.0 * PI * f * t))
            .sum::<f64>();
        if let Some(d) = self.drift {
            v += d.amplitude * libm::sin(2.0 * PI * t / d.period);
        }
        v
    }
}

/// Gaussian noise with one-sided power shape `psd(f)` at rate `fs`, by
/// spectral shaping of white noise. The DC bin is zeroed.
fn shaped_noise(rng: &mut NoiseRng, n: usize, fs: f64, psd: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut x = vec![0.0; n];
    rng.fill_normal(&mut x, libm::sqrt(fs / 2.0));
    let mut spec = fft::forward_real(&x);
    for (k, v) in spec.iter_mut().enumerate() {
        let kk = k.min(n - k);
        *v = if kk == 0 {
            Complex64::new(0.0, 0.0)
        } else {
            *v * libm::sqrt(psd(kk as f64 * fs / n as f64))
        };
    }
    fft::inverse(&spec).iter().map(|c| c.re).collect()
}

/// Render `spec` as a field trace at the sensor sampling rate.
pub fn synthesize(spec: &SynthSpec) -> Result<TimeTrace> {
    spec.validate()?;
    let fs = spec.sensor.sampling_frequency;
    let fi = fs * OVERSAMPLE as f64;
    let n = libm::round(spec.duration * fs) as usize;
    let sections = match spec.lockin_order {
        Some(order) => OnePoleCascade::new(spec.sensor.lockin_f3db, order)?.sections(fi)?,
        None => Vec::new(),
    };
    // run the filter in on extra leading samples so the kept record is
    // stationary
    let warm = if sections.is_empty() {
        0
    } else {
        settle_length(&sections).next_multiple_of(OVERSAMPLE)
    };
    let ni = n * OVERSAMPLE + warm;

    let field_density = spec.field_noise_density()?;
    let mut x = vec![0.0; ni];
    if field_density > 0.0 {
        let i = spec.sensor.fl_photocurrent;
        let b = &spec.budget;
        let response = libm::fabs(spec.sensor.field_response());
        let mut rng = NoiseRng::seeded(derive_seed(spec.seed, 0));
        let white_psd = match spec.intensity_shape {
            None => b.n_elec * b.n_elec + b.p1 * i + b.p2 * i * i,
            Some(_) => b.n_elec * b.n_elec + b.p1 * i,
        };
        rng.fill_normal(&mut x, libm::sqrt(white_psd * fi / 2.0) / response);
        if let Some(shape) = spec.intensity_shape {
            let s0 = b.p2 * i * i / (response * response);
            let mut rng = NoiseRng::seeded(derive_seed(spec.seed, 1));
            let extra = shaped_noise(&mut rng, ni, fi, |f| {
                s0 * (1.0 + libm::pow(shape.corner / f, shape.exponent))
            });
            for (v, e) in x.iter_mut().zip(extra) {
                *v += e;
            }
        }
    }
    for (k, v) in x.iter_mut().enumerate() {
        let t = (k as f64 - warm as f64) / fi;
        *v += spec.deterministic_field(t);
    }

    let filtered = filter_samples(&sections, &x, FilterMode::Causal);
    let decimated: Vec<f64> = filtered[warm..]
        .chunks_exact(OVERSAMPLE)
        .map(|c| c.iter().sum::<f64>() / OVERSAMPLE as f64)
        .collect();
    let trace = TimeTrace::new(decimated, fs, Units::Tesla)?;
    match spec.servo {
        Some(s) => servo_lock(&trace, s.lpf_cutoff, s.loop_bandwidth),
        None => Ok(trace),
    }
}

/// Amplitude gain of the synthesis chain (lock-in filter and block
/// averaging) for a tone at `f`.
pub fn chain_gain(spec: &SynthSpec, f: f64) -> Result<f64> {
    let fi = spec.sensor.sampling_frequency * OVERSAMPLE as f64;
    let lockin = match spec.lockin_order {
        Some(order) => OnePoleCascade::new(spec.sensor.lockin_f3db, order)?.magnitude(f, fi)?,
        None => 1.0,
    };
    let m = OVERSAMPLE as f64;
    let x = PI * f / fi;
    let boxcar = if x == 0.0 {
        1.0
    } else {
        libm::fabs(libm::sin(m * x) / (m * libm::sin(x)))
    };
    Ok(lockin * boxcar)
}
