//! MW-frequency servo: integral feedback on the low-pass-filtered output.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::dsp::filter::Biquad;
use crate::error::{Error, Result};
use crate::trace::TimeTrace;

pub const DEFAULT_SERVO_LPF: f64 = 10.0;
pub const DEFAULT_LOOP_BANDWIDTH: f64 = 2.0;

/// Closed-loop output `y = x − u`, where the correction `u` integrates the
/// one-pole-filtered `y` with gain `2π·loop_bandwidth`. Well below
/// `lpf_cutoff` the loop acts as a first-order high-pass at
/// `loop_bandwidth`.
pub fn servo_lock(trace: &TimeTrace, lpf_cutoff: f64, loop_bandwidth: f64) -> Result<TimeTrace> {
    let fs = trace.sampling_frequency();
    if !(loop_bandwidth > 0.0 && loop_bandwidth < lpf_cutoff && lpf_cutoff < fs / 2.0) {
        return Err(Error::invalid(alloc::format!(
            "servo needs 0 < loop bandwidth ({loop_bandwidth}) < lpf cutoff ({lpf_cutoff}) < F_s/2 ({})",
            fs / 2.0
        )));
    }
    let lpf = Biquad::one_pole_lowpass(lpf_cutoff, fs)?;
    let [b0, b1, _] = lpf.b;
    let a1 = lpf.a[0];
    let gain = 2.0 * PI * loop_bandwidth / fs;
    let (mut u, mut z) = (0.0, 0.0);
    let out: Vec<f64> = trace
        .samples()
        .iter()
        .map(|&x| {
            let y = x - u;
            let e = b0 * y + z;
            z = b1 * y - a1 * e;
            u += gain * e;
            y
        })
        .collect();
    Ok(trace.with_samples(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::Units;
    use alloc::vec;
    use proptest::prelude::*;

    const FS: f64 = 400.0;

    /// Steady-state amplitude of the response to a unit sine at `f`,
    /// projected over whole periods after the transient.
    fn gain_at(f: f64) -> f64 {
        let periods = 40.0;
        let n_settle = (20.0 * FS) as usize;
        let n = n_settle + (periods / f * FS) as usize;
        let x: Vec<f64> = (0..n)
            .map(|i| libm::sin(2.0 * PI * f * i as f64 / FS))
            .collect();
        let t = TimeTrace::new(x, FS, Units::Tesla).unwrap();
        let y = servo_lock(&t, 10.0, 2.0).unwrap();
        let (mut s, mut c) = (0.0, 0.0);
        let m = n - n_settle;
        for i in n_settle..n {
            let w = 2.0 * PI * f * i as f64 / FS;
            s += y.samples()[i] * libm::sin(w);
            c += y.samples()[i] * libm::cos(w);
        }
        2.0 * libm::sqrt(s * s + c * c) / m as f64
    }

    #[test]
    fn dc_is_removed() {
        let t = TimeTrace::new(vec![5.0; 4000], FS, Units::Tesla).unwrap();
        let y = servo_lock(&t, 10.0, 2.0).unwrap();
        assert!(y.samples()[3999].abs() < 1e-9);
    }

    #[test]
    fn slow_tone_suppressed_tenfold() {
        let g = gain_at(0.2);
        assert!(g <= 0.1, "{g}");
        // first-order oracle f/√(f² + f_bw²)
        let oracle = 0.2 / libm::sqrt(0.04 + 4.0);
        assert!((g / oracle - 1.0).abs() < 0.02, "{g} vs {oracle}");
    }

    #[test]
    fn fast_tone_preserved() {
        let g = gain_at(40.0);
        assert!((g - 1.0).abs() < 0.05, "{g}");
    }

    #[test]
    fn ordering_enforced() {
        let t = TimeTrace::new(vec![0.0; 10], FS, Units::Tesla).unwrap();
        assert!(servo_lock(&t, 2.0, 10.0).is_err());
        assert!(servo_lock(&t, 250.0, 2.0).is_err());
    }

    proptest! {
        #[test]
        fn ramp_stays_bounded(slope in -1e3f64..1e3) {
            let x: Vec<f64> = (0..20_000).map(|i| slope * i as f64 / FS).collect();
            let t = TimeTrace::new(x, FS, Units::Tesla).unwrap();
            let y = servo_lock(&t, 10.0, 2.0).unwrap();
            // steady-state error of a type-1 loop is slope/K
            let bound = 2.0 * slope.abs() / (2.0 * PI * 2.0) + 1e-9;
            prop_assert!(y.samples()[5000..].iter().all(|v| v.abs() <= bound));
        }
    }
}
