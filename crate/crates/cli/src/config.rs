//! Run configuration: a sectioned TOML file whose keys carry their units.
//!
//! Every section except `[synth]` falls back to the built-in preset, and so
//! does every missing key inside a section.

use std::path::{Path, PathBuf};

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use nvmag_core::dsp::{Bandpass, FilterChain, FilterMode, Window};
use nvmag_core::fitting::{OdmrFitOptions, WidthMode};
use nvmag_core::noise::NoiseBudget;
use nvmag_core::synth::{
    calibrate_order, Drift, IntensityShape, ServoSpec, SynthSpec, Tone, DEFAULT_LOOP_BANDWIDTH,
    DEFAULT_SERVO_LPF,
};
use nvmag_core::SensorConfig;

use crate::error::{CliError, Result};

/// The preset file shipped with the binary.
pub const PUBLISHED_PRESET: &str = include_str!("../presets/published.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub sensor: SensorSection,
    pub budget: BudgetSection,
    pub synth: Option<SynthSection>,
    pub filters: FilterSection,
    pub analysis: AnalysisSection,
    pub odmr: OdmrSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            output_dir: PathBuf::from("nvmag-out"),
            sensor: SensorSection::default(),
            budget: BudgetSection::default(),
            synth: None,
            filters: FilterSection::default(),
            analysis: AnalysisSection::default(),
            odmr: OdmrSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorSection {
    pub fl_photocurrent_a: f64,
    pub zero_crossing_slope_a_per_hz: f64,
    pub gyromagnetic_ratio_hz_per_t: f64,
    pub hyperfine_splitting_hz: f64,
    pub mod_frequency_hz: f64,
    pub mod_depth_hz: f64,
    pub contrast: f64,
    pub three_tone_gain: f64,
    pub bias_field_t: f64,
    pub lockin_f3db_hz: f64,
    pub lockin_nep_bw_hz: f64,
    pub sampling_frequency_hz: f64,
}

impl Default for SensorSection {
    fn default() -> Self {
        let s = SensorConfig::default();
        Self {
            fl_photocurrent_a: s.fl_photocurrent,
            zero_crossing_slope_a_per_hz: s.zero_crossing_slope,
            gyromagnetic_ratio_hz_per_t: s.gyromagnetic_ratio,
            hyperfine_splitting_hz: s.hyperfine_splitting,
            mod_frequency_hz: s.mod_frequency,
            mod_depth_hz: s.mod_depth,
            contrast: s.contrast,
            three_tone_gain: s.three_tone_gain,
            bias_field_t: s.bias_field,
            lockin_f3db_hz: s.lockin_f3db,
            lockin_nep_bw_hz: s.lockin_nep_bw,
            sampling_frequency_hz: s.sampling_frequency,
        }
    }
}

impl SensorSection {
    pub fn to_sensor(&self) -> Result<SensorConfig> {
        let s = SensorConfig {
            fl_photocurrent: self.fl_photocurrent_a,
            zero_crossing_slope: self.zero_crossing_slope_a_per_hz,
            gyromagnetic_ratio: self.gyromagnetic_ratio_hz_per_t,
            hyperfine_splitting: self.hyperfine_splitting_hz,
            mod_frequency: self.mod_frequency_hz,
            mod_depth: self.mod_depth_hz,
            contrast: self.contrast,
            three_tone_gain: self.three_tone_gain,
            bias_field: self.bias_field_t,
            lockin_f3db: self.lockin_f3db_hz,
            lockin_nep_bw: self.lockin_nep_bw_hz,
            sampling_frequency: self.sampling_frequency_hz,
        };
        s.validate()
            .map_err(|e| CliError::Config(format!("[sensor] {e}")))?;
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BudgetSection {
    pub n_elec_a_per_sqrthz: f64,
    pub p1_a_per_hz: f64,
    pub p2_per_hz: f64,
    pub p1_std_a_per_hz: f64,
    pub p2_std_per_hz: f64,
    pub p1_p2_corr: f64,
}

impl Default for BudgetSection {
    fn default() -> Self {
        let b = NoiseBudget::published();
        Self {
            n_elec_a_per_sqrthz: b.n_elec,
            p1_a_per_hz: b.p1,
            p2_per_hz: b.p2,
            p1_std_a_per_hz: b.covariance[(0, 0)].sqrt(),
            p2_std_per_hz: b.covariance[(1, 1)].sqrt(),
            p1_p2_corr: 0.0,
        }
    }
}

impl BudgetSection {
    pub fn to_budget(&self) -> Result<NoiseBudget> {
        if !(-1.0..=1.0).contains(&self.p1_p2_corr) {
            return Err(CliError::Config(
                "[budget] p1_p2_corr must lie in [-1, 1]".into(),
            ));
        }
        let (s1, s2) = (self.p1_std_a_per_hz, self.p2_std_per_hz);
        let c12 = self.p1_p2_corr * s1 * s2;
        NoiseBudget::with_covariance(
            self.n_elec_a_per_sqrthz,
            self.p1_a_per_hz,
            self.p2_per_hz,
            Matrix2::new(s1 * s1, c12, c12, s2 * s2),
        )
        .map_err(|e| CliError::Config(format!("[budget] {e}")))
    }
}

/// `lockin_order = "auto" | "off" | <integer>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LockinOrder {
    Order(usize),
    Keyword(LockinKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LockinKeyword {
    Auto,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarmonicEntry {
    pub frequency_hz: f64,
    pub amplitude_t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToneEntry {
    pub frequency_hz: f64,
    pub amplitude_t: f64,
    #[serde(default)]
    pub phase_rad: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftEntry {
    pub period_s: f64,
    pub amplitude_t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServoEntry {
    pub lpf_cutoff_hz: f64,
    pub loop_bandwidth_hz: f64,
}

impl Default for ServoEntry {
    fn default() -> Self {
        Self {
            lpf_cutoff_hz: DEFAULT_SERVO_LPF,
            loop_bandwidth_hz: DEFAULT_LOOP_BANDWIDTH,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntensityShapeEntry {
    pub corner_hz: f64,
    pub exponent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSection {
    pub duration_s: f64,
    pub lockin_order: LockinOrder,
    pub line_harmonics: Vec<HarmonicEntry>,
    pub injected_signals: Vec<ToneEntry>,
    pub drift: Option<DriftEntry>,
    pub servo: Option<ServoEntry>,
    pub intensity_shape: Option<IntensityShapeEntry>,
}

impl Default for SynthSection {
    fn default() -> Self {
        Self {
            duration_s: 5.0,
            lockin_order: LockinOrder::Keyword(LockinKeyword::Auto),
            line_harmonics: Vec::new(),
            injected_signals: Vec::new(),
            drift: None,
            servo: None,
            intensity_shape: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeName {
    ZeroPhase,
    Causal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterSection {
    /// Notch every harmonic of this frequency below Nyquist; omit for none.
    pub line_frequency_hz: Option<f64>,
    pub notch_q: f64,
    /// Additional notch centers.
    pub extra_notches_hz: Vec<f64>,
    pub bandpass: bool,
    pub bandpass_lo_hz: f64,
    pub bandpass_hi_hz: f64,
    pub bandpass_order: usize,
    pub mode: ModeName,
}

impl Default for FilterSection {
    fn default() -> Self {
        Self {
            line_frequency_hz: Some(50.0),
            notch_q: 30.0,
            extra_notches_hz: Vec::new(),
            bandpass: true,
            bandpass_lo_hz: 5.0,
            bandpass_hi_hz: 100.0,
            bandpass_order: 2,
            mode: ModeName::ZeroPhase,
        }
    }
}

impl FilterSection {
    pub fn to_chain(&self, fs: f64) -> Result<(FilterChain, FilterMode)> {
        let mut notches = Vec::new();
        if let Some(f0) = self.line_frequency_hz {
            if f0.is_nan() || f0 <= 0.0 {
                return Err(CliError::Config(
                    "[filters] line_frequency_hz must be positive".into(),
                ));
            }
            let mut f = f0;
            while f < fs / 2.0 {
                notches.push((f, self.notch_q));
                f += f0;
            }
        }
        notches.extend(self.extra_notches_hz.iter().map(|&f| (f, self.notch_q)));
        let chain = FilterChain {
            notches,
            bandpass: self.bandpass.then_some(Bandpass {
                f_lo: self.bandpass_lo_hz,
                f_hi: self.bandpass_hi_hz,
                order: self.bandpass_order,
            }),
        };
        chain
            .validate(fs)
            .map_err(|e| CliError::Config(format!("[filters] {e}")))?;
        let mode = match self.mode {
            ModeName::ZeroPhase => FilterMode::ZeroPhase,
            ModeName::Causal => FilterMode::Causal,
        };
        Ok((chain, mode))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowName {
    Rectangular,
    Hann,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSection {
    pub asd: bool,
    pub sensitivity: bool,
    pub adev: bool,
    pub asd_segments: usize,
    pub asd_window: WindowName,
    pub remove_drift_component: bool,
    /// Explicit averaging times; the default grid is used when absent.
    pub adev_taus_s: Option<Vec<f64>>,
    pub nep_samples: usize,
    pub nep_trials: usize,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            asd: true,
            sensitivity: true,
            adev: true,
            asd_segments: 10,
            asd_window: WindowName::Rectangular,
            remove_drift_component: false,
            adev_taus_s: None,
            nep_samples: 1 << 16,
            nep_trials: 10,
        }
    }
}

impl AnalysisSection {
    pub fn window(&self) -> Window {
        match self.asd_window {
            WindowName::Rectangular => Window::Rectangular,
            WindowName::Hann => Window::Hann,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WidthModeName {
    Shared,
    PerPeak,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OdmrSection {
    pub fwhm_hz: f64,
    pub central_slope_a_per_hz: f64,
    pub half_span_hz: f64,
    pub n_points: usize,
    pub rel_noise: f64,
    pub constrain_centers: bool,
    pub width_mode: WidthModeName,
    /// Half-width of the zero-crossing regression; Γ/20 when absent.
    pub window_hz: Option<f64>,
}

impl Default for OdmrSection {
    fn default() -> Self {
        Self {
            fwhm_hz: 0.48e6,
            central_slope_a_per_hz: 324e-12,
            half_span_hz: 8.0e6,
            n_points: 801,
            rel_noise: 0.01,
            constrain_centers: true,
            width_mode: WidthModeName::Shared,
            window_hz: None,
        }
    }
}

impl OdmrSection {
    pub fn fit_options(&self) -> OdmrFitOptions {
        OdmrFitOptions {
            constrain_centers: self.constrain_centers,
            width_mode: match self.width_mode {
                WidthModeName::Shared => WidthMode::Shared,
                WidthModeName::PerPeak => WidthMode::PerPeak,
            },
            ..Default::default()
        }
    }
}

impl RunConfig {
    /// The built-in preset.
    pub fn published() -> Self {
        Self::parse(PUBLISHED_PRESET).expect("built-in preset parses")
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// `source` is a file path, or `published` for the built-in preset.
    pub fn load(source: Option<&Path>) -> Result<Self> {
        match source {
            None => Ok(Self::published()),
            Some(p) if p == Path::new("published") => Ok(Self::published()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                Self::parse(&text).map_err(|e| match e {
                    CliError::Config(msg) => CliError::Config(format!("{}: {msg}", p.display())),
                    other => other,
                })
            }
        }
    }

    pub fn synth_spec(&self) -> Result<SynthSpec> {
        let section = self
            .synth
            .as_ref()
            .ok_or_else(|| CliError::Usage("config has no [synth] section".into()))?;
        if section.duration_s.is_nan() || section.duration_s <= 0.0 {
            return Err(CliError::Usage(format!(
                "[synth] duration_s must be positive, got {}",
                section.duration_s
            )));
        }
        let sensor = self.sensor.to_sensor()?;
        let lockin_order = match section.lockin_order {
            LockinOrder::Order(n) => Some(n),
            LockinOrder::Keyword(LockinKeyword::Off) => None,
            LockinOrder::Keyword(LockinKeyword::Auto) => {
                Some(calibrate_order(sensor.lockin_f3db, sensor.lockin_nep_bw)?)
            }
        };
        let spec = SynthSpec {
            sensor,
            budget: self.budget.to_budget()?,
            line_harmonics: section
                .line_harmonics
                .iter()
                .map(|h| (h.frequency_hz, h.amplitude_t))
                .collect(),
            drift: section.drift.map(|d| Drift {
                period: d.period_s,
                amplitude: d.amplitude_t,
            }),
            injected_signals: section
                .injected_signals
                .iter()
                .map(|t| Tone::new(t.frequency_hz, t.amplitude_t, t.phase_rad))
                .collect(),
            servo: section.servo.map(|s| ServoSpec {
                lpf_cutoff: s.lpf_cutoff_hz,
                loop_bandwidth: s.loop_bandwidth_hz,
            }),
            duration: section.duration_s,
            seed: self.seed,
            lockin_order,
            intensity_shape: section.intensity_shape.map(|s| IntensityShape {
                corner: s.corner_hz,
                exponent: s.exponent,
            }),
        };
        spec.validate()
            .map_err(|e| CliError::Config(format!("[synth] {e}")))?;
        Ok(spec)
    }
}
