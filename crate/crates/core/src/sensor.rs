//! Operating point of the magnetometer.

use crate::error::{Error, Result};

/// Physical operating point: photocurrent, transduction slope and the
/// modulation/readout chain settings.
///
/// Defaults are the published operating point of the (111) HPHT sensor:
/// 6.2 kHz / 160 kHz frequency modulation, three-tone driving at 2.16 MHz
/// spacing, 0.9 mT bias, 149.4 Hz lock-in cutoff (168.8 Hz NEP bandwidth)
/// and 400 Hz sampling. The default photocurrent and slope are the
/// sensitivity-measurement values (6.4 mA, 332 pA/Hz).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorConfig {
    /// Far-detuned fluorescence photocurrent (A).
    pub fl_photocurrent: f64,
    /// Zero-crossing slope of the demodulated photocurrent (A/Hz).
    pub zero_crossing_slope: f64,
    /// Electron gyromagnetic ratio (Hz/T).
    pub gyromagnetic_ratio: f64,
    /// ¹⁴N hyperfine splitting, also the three-tone spacing (Hz).
    pub hyperfine_splitting: f64,
    pub mod_frequency: f64,
    pub mod_depth: f64,
    /// Peak contrast of the ODMR line, in (0, 1).
    pub contrast: f64,
    /// Amplitude enhancement of the central peak from three-tone driving.
    pub three_tone_gain: f64,
    /// Bias field along the NV axis (T).
    pub bias_field: f64,
    /// 3-dB cutoff of the lock-in output filter (Hz).
    pub lockin_f3db: f64,
    /// Noise-equivalent-power bandwidth of the lock-in output filter (Hz).
    pub lockin_nep_bw: f64,
    /// Digitizer sampling frequency (Hz).
    pub sampling_frequency: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            fl_photocurrent: 6.4e-3,
            zero_crossing_slope: 332e-12,
            gyromagnetic_ratio: 2.80e10,
            hyperfine_splitting: 2.16e6,
            mod_frequency: 6.2e3,
            mod_depth: 1.6e5,
            contrast: 0.03,
            three_tone_gain: 2.5,
            bias_field: 0.9e-3,
            lockin_f3db: 149.4,
            lockin_nep_bw: 168.8,
            sampling_frequency: 400.0,
        }
    }
}

impl SensorConfig {
    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("fl_photocurrent", self.fl_photocurrent),
            ("hyperfine_splitting", self.hyperfine_splitting),
            ("mod_frequency", self.mod_frequency),
            ("mod_depth", self.mod_depth),
            ("three_tone_gain", self.three_tone_gain),
            ("lockin_f3db", self.lockin_f3db),
            ("lockin_nep_bw", self.lockin_nep_bw),
            ("sampling_frequency", self.sampling_frequency),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(alloc::format!(
                    "{name} must be nonnegative and finite, got {v}"
                )));
            }
        }
        if !(self.gyromagnetic_ratio > 0.0 && self.gyromagnetic_ratio.is_finite()) {
            return Err(Error::invalid("gyromagnetic_ratio must be positive"));
        }
        if !(self.contrast > 0.0 && self.contrast < 1.0) {
            return Err(Error::invalid("contrast must lie in (0, 1)"));
        }
        if !self.zero_crossing_slope.is_finite() || !self.bias_field.is_finite() {
            return Err(Error::invalid("slope and bias field must be finite"));
        }
        if self.sampling_frequency == 0.0 {
            return Err(Error::invalid("sampling_frequency must be positive"));
        }
        Ok(())
    }

    /// Field-to-current transduction γ_e · dĨ/dδ (A/T).
    pub fn field_response(&self) -> f64 {
        self.gyromagnetic_ratio * self.zero_crossing_slope
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        SensorConfig::default().validate().unwrap();
    }

    #[test]
    fn contrast_bounds() {
        let mut c = SensorConfig {
            contrast: 1.0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        c.contrast = 0.0;
        assert!(c.validate().is_err());
    }
}
