//! IIR filtering: biquad sections, power-line notches, Butterworth band-pass
//! and the identical one-pole cascade used as the lock-in output filter.

use alloc::vec::Vec;
use core::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::trace::TimeTrace;

/// Default notch quality factor.
pub const DEFAULT_NOTCH_Q: f64 = 30.0;
/// Power-line fundamental whose harmonics are notched.
pub const LINE_FREQUENCY: f64 = 50.0;

/// Second-order section, `a0` normalized to 1. First-order sections set
/// `b[2] = a[1] = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    /// Denominator `[a1, a2]`.
    pub a: [f64; 2],
}

impl Biquad {
    /// Notch at `center` with quality factor `q` (bandwidth `center / q`).
    pub fn notch(center: f64, q: f64, fs: f64) -> Result<Self> {
        Self::notch_scaled(center, q, fs, 1.0)
    }

    /// Notch whose `tan(bw/2)` is multiplied by `scale`.
    fn notch_scaled(center: f64, q: f64, fs: f64, scale: f64) -> Result<Self> {
        if !(center > 0.0 && center < fs / 2.0) {
            return Err(Error::invalid(alloc::format!(
                "notch center {center} Hz must lie in (0, {}) Hz",
                fs / 2.0
            )));
        }
        if !(q > 0.0 && q.is_finite()) {
            return Err(Error::invalid("notch quality factor must be positive"));
        }
        let w0 = 2.0 * PI * center / fs;
        let bw = w0 / q;
        let g = 1.0 / (1.0 + scale * libm::tan(bw / 2.0));
        let c = libm::cos(w0);
        Ok(Self {
            b: [g, -2.0 * g * c, g],
            a: [-2.0 * g * c, 2.0 * g - 1.0],
        })
    }

    /// Bilinear second-order Butterworth-family section with prewarped
    /// corner `k = tan(π f_c / F_s)` and pole quality factor `q`.
    fn second_order(k: f64, q: f64, highpass: bool) -> Self {
        let norm = 1.0 / (1.0 + k / q + k * k);
        let a = [2.0 * (k * k - 1.0) * norm, (1.0 - k / q + k * k) * norm];
        let b = if highpass {
            [norm, -2.0 * norm, norm]
        } else {
            let b0 = k * k * norm;
            [b0, 2.0 * b0, b0]
        };
        Self { b, a }
    }

    fn first_order(k: f64, highpass: bool) -> Self {
        let norm = 1.0 / (1.0 + k);
        let b = if highpass {
            [norm, -norm, 0.0]
        } else {
            [k * norm, k * norm, 0.0]
        };
        Self {
            b,
            a: [(k - 1.0) * norm, 0.0],
        }
    }

    /// Bilinear one-pole low-pass with 3-dB point `cutoff`.
    pub fn one_pole_lowpass(cutoff: f64, fs: f64) -> Result<Self> {
        check_corner(cutoff, fs)?;
        Ok(Self::first_order(libm::tan(PI * cutoff / fs), false))
    }

    /// Complex response at `f`.
    pub fn response(&self, f: f64, fs: f64) -> Complex64 {
        let w = 2.0 * PI * f / fs;
        let z1 = Complex64::new(libm::cos(w), -libm::sin(w));
        let z2 = z1 * z1;
        let num = self.b[0] + z1 * self.b[1] + z2 * self.b[2];
        let den = Complex64::new(1.0, 0.0) + z1 * self.a[0] + z2 * self.a[1];
        num / den
    }

    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }

    /// Largest pole magnitude.
    fn pole_radius(&self) -> f64 {
        let (a1, a2) = (self.a[0], self.a[1]);
        let disc = a1 * a1 - 4.0 * a2;
        if disc < 0.0 {
            libm::sqrt(a2)
        } else {
            let s = libm::sqrt(disc);
            libm::fabs(-a1 + s).max(libm::fabs(-a1 - s)) / 2.0
        }
    }

    /// Filter in place (transposed direct form II). The state starts at the
    /// steady state for a constant input equal to `x[0]`.
    pub fn process(&self, x: &mut [f64]) {
        let Some(&x0) = x.first() else { return };
        let [b0, b1, b2] = self.b;
        let [a1, a2] = self.a;
        let y0 = self.dc_gain() * x0;
        let mut z2 = b2 * x0 - a2 * y0;
        let mut z1 = b1 * x0 - a1 * y0 + z2;
        for v in x.iter_mut() {
            let input = *v;
            let y = b0 * input + z1;
            z1 = b1 * input - a1 * y + z2;
            z2 = b2 * input - a2 * y;
            *v = y;
        }
    }
}

fn check_corner(f: f64, fs: f64) -> Result<()> {
    if !(fs > 0.0 && fs.is_finite()) {
        return Err(Error::invalid("sampling frequency must be positive"));
    }
    if !(f > 0.0 && f < fs / 2.0) {
        return Err(Error::invalid(alloc::format!(
            "corner frequency {f} Hz must lie in (0, {}) Hz",
            fs / 2.0
        )));
    }
    Ok(())
}

/// Butterworth sections of order `order` with 3-dB point `cutoff`.
pub fn butterworth(order: usize, cutoff: f64, fs: f64, highpass: bool) -> Result<Vec<Biquad>> {
    check_corner(cutoff, fs)?;
    if order == 0 {
        return Err(Error::invalid("filter order must be at least 1"));
    }
    let k = libm::tan(PI * cutoff / fs);
    let mut out = Vec::with_capacity(order.div_ceil(2));
    for i in 0..order / 2 {
        let theta = (2 * i + 1) as f64 * PI / (2 * order) as f64;
        out.push(Biquad::second_order(
            k,
            1.0 / (2.0 * libm::sin(theta)),
            highpass,
        ));
    }
    if order % 2 == 1 {
        out.push(Biquad::first_order(k, highpass));
    }
    Ok(out)
}

/// Corner at which an order-`order` Butterworth section must be designed so
/// that running it forward and backward puts the 3-dB point at `edge`.
fn zero_phase_corner(edge: f64, order: usize, fs: f64, highpass: bool) -> f64 {
    // |H|⁴ = 1/2 ⇔ (Ω/Ωc)^(2n) = √2 − 1
    let r = libm::pow(SQRT_2 - 1.0, 1.0 / (2.0 * order as f64));
    let t = libm::tan(PI * edge / fs);
    let t = if highpass { t * r } else { t / r };
    libm::atan(t) * fs / PI
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FilterMode {
    /// Forward-backward; squared magnitude, no phase shift.
    #[default]
    ZeroPhase,
    /// Single forward pass.
    Causal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bandpass {
    pub f_lo: f64,
    pub f_hi: f64,
    pub order: usize,
}

/// Harmonic notches followed by an optional band-pass. Band edges and notch
/// widths (`center / Q`) refer to the 3-dB points of the overall response in
/// the mode the chain is run in, so zero-phase designs are compensated for
/// the second pass.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FilterChain {
    /// `(center Hz, quality factor)`.
    pub notches: Vec<(f64, f64)>,
    pub bandpass: Option<Bandpass>,
}

impl FilterChain {
    /// Notches at every multiple of 50 Hz below Nyquist plus a 5–100 Hz,
    /// second-order band-pass.
    pub fn published(fs: f64) -> Self {
        let mut notches = Vec::new();
        let mut f = LINE_FREQUENCY;
        while f < fs / 2.0 {
            notches.push((f, DEFAULT_NOTCH_Q));
            f += LINE_FREQUENCY;
        }
        Self {
            notches,
            bandpass: Some(Bandpass {
                f_lo: 5.0,
                f_hi: 100.0,
                order: 2,
            }),
        }
    }

    pub fn validate(&self, fs: f64) -> Result<()> {
        self.sections(fs, FilterMode::Causal).map(|_| ())
    }

    /// Designed sections for running at `fs` in `mode`.
    pub fn sections(&self, fs: f64, mode: FilterMode) -> Result<Vec<Biquad>> {
        let mut out = Vec::new();
        // |H|² of a notch is t²/(t² + tan²(bw/2)); squaring it again halves
        // at t² = tan²(bw/2)/(√2 − 1)
        let notch_scale = match mode {
            FilterMode::Causal => 1.0,
            FilterMode::ZeroPhase => libm::sqrt(SQRT_2 - 1.0),
        };
        for &(center, q) in &self.notches {
            out.push(Biquad::notch_scaled(center, q, fs, notch_scale)?);
        }
        if let Some(bp) = self.bandpass {
            if !(bp.f_lo < bp.f_hi) {
                return Err(Error::invalid("band-pass requires f_lo < f_hi"));
            }
            check_corner(bp.f_lo, fs)?;
            check_corner(bp.f_hi, fs)?;
            let (lo, hi) = match mode {
                FilterMode::Causal => (bp.f_lo, bp.f_hi),
                FilterMode::ZeroPhase => (
                    zero_phase_corner(bp.f_lo, bp.order, fs, true),
                    zero_phase_corner(bp.f_hi, bp.order, fs, false),
                ),
            };
            out.extend(butterworth(bp.order, lo, fs, true)?);
            out.extend(butterworth(bp.order, hi, fs, false)?);
        }
        Ok(out)
    }

    /// Magnitude response at `f` as seen by a trace filtered in `mode`.
    pub fn magnitude(&self, f: f64, fs: f64, mode: FilterMode) -> Result<f64> {
        let h: f64 = self
            .sections(fs, mode)?
            .iter()
            .map(|s| s.response(f, fs).norm())
            .product();
        Ok(match mode {
            FilterMode::ZeroPhase => h * h,
            FilterMode::Causal => h,
        })
    }
}

/// Samples for the impulse response of `sections` to fall below 1e-9.
pub(crate) fn settle_length(sections: &[Biquad]) -> usize {
    sections
        .iter()
        .map(|s| {
            let r = s.pole_radius();
            if r <= 0.0 {
                3
            } else if r >= 1.0 {
                usize::MAX / 4
            } else {
                libm::ceil(libm::log(1e-9) / libm::log(r)) as usize + 3
            }
        })
        .sum()
}

/// Run `sections` over `x` in `mode`. Zero-phase mode pads both ends with
/// an odd reflection long enough for the transients to die out.
pub fn filter_samples(sections: &[Biquad], x: &[f64], mode: FilterMode) -> Vec<f64> {
    let cascade = |buf: &mut [f64]| {
        for s in sections {
            s.process(buf);
        }
    };
    match mode {
        FilterMode::Causal => {
            let mut y = x.to_vec();
            cascade(&mut y);
            y
        }
        FilterMode::ZeroPhase => {
            let n = x.len();
            if n == 0 {
                return Vec::new();
            }
            let pad = settle_length(sections).min(n - 1);
            let mut buf = Vec::with_capacity(n + 2 * pad);
            buf.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
            buf.extend_from_slice(x);
            buf.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));
            cascade(&mut buf);
            buf.reverse();
            cascade(&mut buf);
            buf.reverse();
            buf[pad..pad + n].to_vec()
        }
    }
}

/// Zero-phase filtering by `chain`.
pub fn apply_filter_chain(trace: &TimeTrace, chain: &FilterChain) -> Result<TimeTrace> {
    apply_filter_chain_with(trace, chain, FilterMode::ZeroPhase)
}

pub fn apply_filter_chain_with(
    trace: &TimeTrace,
    chain: &FilterChain,
    mode: FilterMode,
) -> Result<TimeTrace> {
    let sections = chain.sections(trace.sampling_frequency(), mode)?;
    Ok(trace.with_samples(filter_samples(&sections, trace.samples(), mode)))
}

/// `order` identical one-pole low-pass sections whose cascade has its
/// 3-dB point at `f3db`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OnePoleCascade {
    pub f3db: f64,
    pub order: usize,
}

impl OnePoleCascade {
    pub fn new(f3db: f64, order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::invalid("cascade order must be at least 1"));
        }
        if !(f3db > 0.0 && f3db.is_finite()) {
            return Err(Error::invalid("cutoff must be positive"));
        }
        Ok(Self { f3db, order })
    }

    /// Identical sections; each one sits at `f3db / √(2^(1/n) − 1)` in the
    /// prewarped frequency so the product is −3 dB at `f3db`.
    pub fn sections(&self, fs: f64) -> Result<Vec<Biquad>> {
        check_corner(self.f3db, fs)?;
        let spread = libm::sqrt(libm::pow(2.0, 1.0 / self.order as f64) - 1.0);
        let k = libm::tan(PI * self.f3db / fs) / spread;
        Ok(alloc::vec![Biquad::first_order(k, false); self.order])
    }

    pub fn magnitude(&self, f: f64, fs: f64) -> Result<f64> {
        Ok(self
            .sections(fs)?
            .iter()
            .map(|s| s.response(f, fs).norm())
            .product())
    }
}
