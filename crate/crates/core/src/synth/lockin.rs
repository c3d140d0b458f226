//! Lock-in output filter model.

use alloc::vec::Vec;

use crate::dsp::filter::{filter_samples, FilterMode, OnePoleCascade};
use crate::dsp::nep::{integrated_nep, FilterSpec};
use crate::error::{Error, Result};
use crate::trace::TimeTrace;

/// Highest cascade order considered by [`calibrate_order`].
pub const MAX_LOCKIN_ORDER: usize = 8;

/// Slack allowed between the requested NEP/f3db ratio and the nearest
/// achievable one before the request is declared unreachable.
pub const RATIO_TOLERANCE: f64 = 0.02;

/// Causal identical-pole cascade with its 3-dB point at `f3db`. The filter
/// state starts settled on the first sample, so a constant passes unchanged.
pub fn apply_lockin_lpf(trace: &TimeTrace, f3db: f64, order: usize) -> Result<TimeTrace> {
    let fs = trace.sampling_frequency();
    if !(f3db > 0.0 && f3db < fs / 2.0) {
        return Err(Error::invalid(alloc::format!(
            "lock-in cutoff {f3db} Hz must lie in (0, {}) Hz",
            fs / 2.0
        )));
    }
    let sections = OnePoleCascade::new(f3db, order)?.sections(fs)?;
    Ok(trace.with_samples(filter_samples(
        &sections,
        trace.samples(),
        FilterMode::Causal,
    )))
}

/// NEP/f3db of an order-`order` cascade, evaluated well above the cutoff so
/// sampling does not distort it.
pub fn cascade_nep_ratio(order: usize) -> Result<f64> {
    let f3db = 1.0;
    let spec = FilterSpec::Lockin(OnePoleCascade::new(f3db, order)?);
    Ok(integrated_nep(&spec, 1000.0 * f3db)? / f3db)
}

/// Cascade order whose NEP/f3db ratio is closest to `target_nep / f3db`.
pub fn calibrate_order(f3db: f64, target_nep: f64) -> Result<usize> {
    if !(f3db > 0.0 && f3db.is_finite() && target_nep.is_finite()) {
        return Err(Error::invalid(
            "cutoff and target bandwidth must be positive and finite",
        ));
    }
    let target = target_nep / f3db;
    let ratios: Vec<f64> = (1..=MAX_LOCKIN_ORDER)
        .map(cascade_nep_ratio)
        .collect::<Result<_>>()?;
    // ratios fall monotonically with order
    let (max, min) = (ratios[0], ratios[MAX_LOCKIN_ORDER - 1]);
    if target > max + RATIO_TOLERANCE || target < min - RATIO_TOLERANCE {
        return Err(Error::NoSolution {
            requested: target,
            min,
            max,
        });
    }
    let best = (0..ratios.len())
        .min_by(|&a, &b| {
            (ratios[a] - target)
                .abs()
                .total_cmp(&(ratios[b] - target).abs())
        })
        .unwrap_or(0);
    Ok(best + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::nep::nep_bandwidth;
    use crate::rng::NoiseRng;
    use crate::trace::Units;
    use alloc::vec;
    use core::f64::consts::{PI, SQRT_2};
    use proptest::prelude::*;

    const FS: f64 = 3200.0;

    #[test]
    fn constant_passes() {
        let t = TimeTrace::new(vec![1.25; 500], FS, Units::Ampere).unwrap();
        let y = apply_lockin_lpf(&t, 149.4, 4).unwrap();
        assert!(y.samples().iter().all(|v| (v - 1.25).abs() < 1e-12));
    }

    #[test]
    fn three_db_point() {
        let n = 6400;
        let f = 149.4;
        let x: Vec<f64> = (0..n)
            .map(|i| libm::sin(2.0 * PI * f * i as f64 / FS))
            .collect();
        let t = TimeTrace::new(x, FS, Units::Ampere).unwrap();
        for order in [1, 2, 4] {
            let y = apply_lockin_lpf(&t, f, order).unwrap();
            let tail = &y.samples()[3200..];
            let a = libm::sqrt(2.0 * tail.iter().map(|v| v * v).sum::<f64>() / tail.len() as f64);
            assert!(
                (a / (1.0 / SQRT_2) - 1.0).abs() < 0.01,
                "order {order}: {a}"
            );
        }
    }

    #[test]
    fn cutoff_above_nyquist() {
        let t = TimeTrace::new(vec![0.0; 10], 400.0, Units::Ampere).unwrap();
        assert!(apply_lockin_lpf(&t, 200.0, 2).is_err());
        assert!(apply_lockin_lpf(&t, 150.0, 0).is_err());
    }

    #[test]
    fn single_and_double_pole_orders() {
        assert_eq!(calibrate_order(100.0, 157.0).unwrap(), 1);
        assert_eq!(calibrate_order(100.0, 122.0).unwrap(), 2);
    }

    #[test]
    fn published_ratio() {
        let order = calibrate_order(149.4, 168.8).unwrap();
        assert_eq!(order, 4);
        let r = cascade_nep_ratio(order).unwrap();
        assert!((r - 168.8 / 149.4).abs() < RATIO_TOLERANCE);
    }

    #[test]
    fn calibrated_order_monte_carlo_cross_check() {
        // the ratio survives running at the synthesis rate
        let spec = FilterSpec::Lockin(OnePoleCascade::new(149.4, 4).unwrap());
        let e = nep_bandwidth(&spec, FS, 1 << 16, 10, 11).unwrap();
        let r = e.value / 149.4;
        assert!((r - 168.8 / 149.4).abs() < RATIO_TOLERANCE, "{r}");
        // and a double-pole cascade lands on its closed-form value
        let spec = FilterSpec::Lockin(OnePoleCascade::new(20.0, 2).unwrap());
        let e = nep_bandwidth(&spec, FS, 1 << 16, 10, 12).unwrap();
        assert!((e.value / 20.0 - 1.2203).abs() < 0.02, "{e:?}");
    }

    #[test]
    fn unreachable_ratio() {
        match calibrate_order(100.0, 90.0) {
            Err(Error::NoSolution { min, max, .. }) => {
                assert!(min > 1.0 && min < 1.1);
                assert!((max - PI / 2.0).abs() < 0.01);
            }
            other => panic!("{other:?}"),
        }
        assert!(calibrate_order(100.0, 300.0).is_err());
    }

    proptest! {
        #[test]
        fn linear(seed in 0u64..500, a in -2.0f64..2.0, b in -2.0f64..2.0, order in 1usize..6) {
            let mut rng = NoiseRng::seeded(seed);
            let mut x = vec![0.0; 300];
            let mut y = vec![0.0; 300];
            rng.fill_normal(&mut x, 1.0);
            rng.fill_normal(&mut y, 1.0);
            let mk = |v: Vec<f64>| TimeTrace::new(v, FS, Units::Ampere).unwrap();
            let combo: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
            let fc = apply_lockin_lpf(&mk(combo), 149.4, order).unwrap();
            let fx = apply_lockin_lpf(&mk(x), 149.4, order).unwrap();
            let fy = apply_lockin_lpf(&mk(y), 149.4, order).unwrap();
            for i in 0..300 {
                let want = a * fx.samples()[i] + b * fy.samples()[i];
                prop_assert!((fc.samples()[i] - want).abs() < 1e-12 * (1.0 + want.abs()));
            }
        }
    }
}
