//! Subcommand bodies. Each one reads its inputs, writes its files under the
//! output directory and returns a flat summary for the terminal.

use std::path::{Path, PathBuf};

use serde::Serialize;

use nvmag_core::dsp::{
    apply_filter_chain_with, asd_with, band_average, integrated_nep, nep_bandwidth, FilterSpec,
    OnePoleCascade,
};
use nvmag_core::fitting::{fit_odmr_spectrum, fit_zero_crossing, DEFAULT_WINDOW_FRACTION};
use nvmag_core::noise::{
    equivalent_photocurrent, field_noise_floor, fit_noise_model, shot_noise_density, NoiseDatum,
    NoiseFitOptions,
};
use nvmag_core::odmr::{synthetic_spectrum, three_tone_peaks, OdmrSpectrum};
use nvmag_core::stability::{
    default_taus, loglog_slope, overlapping_adev, remove_drift_component, sensitivity, AdevReport,
};
use nvmag_core::synth::synthesize;
use nvmag_core::{TimeTrace, Units};

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::io;
use crate::plot::{line_chart, Axes, Series};
use crate::reproduce::{self, ReproReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Settings shared by every subcommand.
#[derive(Debug, Clone)]
pub struct Context {
    pub config: RunConfig,
    pub out: PathBuf,
    pub format: Format,
    pub plot: bool,
}

impl Context {
    pub fn new(config: RunConfig, out: Option<PathBuf>, format: Format, plot: bool) -> Self {
        let out = out.unwrap_or_else(|| config.output_dir.clone());
        Self {
            config,
            out,
            format,
            plot,
        }
    }

    fn prepare(&self) -> Result<()> {
        std::fs::create_dir_all(&self.out).map_err(|e| CliError::io(&self.out, e))
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn write_summary(&self, stem: &str, summary: &Summary) -> Result<PathBuf> {
        let path = match self.format {
            Format::Csv => self.path(&format!("{stem}.csv")),
            Format::Json => self.path(&format!("{stem}.json")),
        };
        match self.format {
            Format::Csv => summary.write_csv(&path)?,
            Format::Json => io::write_json(&path, summary)?,
        }
        Ok(path)
    }
}

/// Ordered `key, value, unit` entries.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Summary {
    pub entries: Vec<Entry>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Entry {
    pub key: String,
    pub value: Value,
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Value {
    Number(f64),
    Text(String),
}

impl Summary {
    pub fn num(&mut self, key: &str, value: f64, unit: &str) -> &mut Self {
        self.entries.push(Entry {
            key: key.into(),
            value: Value::Number(value),
            unit: unit.into(),
        });
        self
    }

    pub fn text(&mut self, key: &str, value: impl Into<String>) -> &mut Self {
        self.entries.push(Entry {
            key: key.into(),
            value: Value::Text(value.into()),
            unit: String::new(),
        });
        self
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.key == key)
            .and_then(|e| match e.value {
                Value::Number(v) => Some(v),
                Value::Text(_) => None,
            })
    }

    fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w =
            csv::Writer::from_path(path).map_err(|e| CliError::format(path, e.to_string()))?;
        let err = |e: csv::Error| CliError::format(path, e.to_string());
        w.write_record(["key", "value", "unit"]).map_err(err)?;
        for e in &self.entries {
            let v = match &e.value {
                Value::Number(x) => format!("{x:.16e}"),
                Value::Text(s) => s.clone(),
            };
            w.write_record([e.key.as_str(), v.as_str(), e.unit.as_str()])
                .map_err(err)?;
        }
        w.flush().map_err(|e| CliError::io(path, e))
    }
}

impl std::fmt::Display for Summary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for e in &self.entries {
            match &e.value {
                Value::Number(x) => writeln!(f, "{:<28} {x:.6e} {}", e.key, e.unit)?,
                Value::Text(s) => writeln!(f, "{:<28} {s}", e.key)?,
            }
        }
        Ok(())
    }
}

pub fn synth(ctx: &Context, duration: Option<f64>) -> Result<Summary> {
    let mut cfg = ctx.config.clone();
    if let (Some(d), Some(s)) = (duration, cfg.synth.as_mut()) {
        s.duration_s = d;
    }
    let spec = cfg.synth_spec()?;
    let trace = synthesize(&spec)?;
    ctx.prepare()?;
    let path = ctx.path("trace.csv");
    io::write_trace(&path, &trace)?;
    if ctx.plot {
        let pts = (0..trace.len())
            .map(|i| (trace.time(i), trace.samples()[i] * 1e12))
            .collect();
        line_chart(
            &ctx.path("trace.svg"),
            "Synthetic trace",
            "time (s)",
            "field (pT)",
            Axes::default(),
            &[Series {
                label: "trace",
                points: pts,
            }],
        );
    }
    let mut s = Summary::default();
    s.text("trace_file", path.display().to_string())
        .num("samples", trace.len() as f64, "")
        .num("sampling_frequency", trace.sampling_frequency(), "Hz")
        .num("duration", trace.duration(), "s")
        .num("std", trace.std_dev(), "T");
    if let Some(order) = spec.lockin_order {
        s.num("lockin_order", order as f64, "");
    }
    ctx.write_summary("synth", &s)?;
    Ok(s)
}

/// Convert an ampere trace to tesla through γ_e·slope.
fn to_field(trace: TimeTrace, config: &RunConfig) -> Result<TimeTrace> {
    match trace.units() {
        Units::Tesla => Ok(trace),
        Units::Ampere => {
            let r = config.sensor.gyromagnetic_ratio_hz_per_t
                * config.sensor.zero_crossing_slope_a_per_hz;
            if !(r.is_finite() && r != 0.0) {
                return Err(CliError::Config(
                    "ampere trace needs a nonzero [sensor] zero_crossing_slope_a_per_hz to convert to field".into(),
                ));
            }
            Ok(trace.rescaled(1.0 / r, Units::Tesla)?)
        }
    }
}

fn adev_for(ctx: &Context, trace: &TimeTrace) -> Result<AdevReport> {
    let a = &ctx.config.analysis;
    let trace = if a.remove_drift_component {
        remove_drift_component(trace)?
    } else {
        trace.clone()
    };
    let taus = match &a.adev_taus_s {
        Some(t) => t.clone(),
        None => default_taus(trace.len(), trace.sampling_frequency()),
    };
    let report = overlapping_adev(&trace, &taus)?;
    if !report.skipped.is_empty() {
        log::warn!(
            "{} averaging times exceed the record and were skipped",
            report.skipped.len()
        );
    }
    Ok(report)
}

fn adev_outputs(ctx: &Context, report: &AdevReport, s: &mut Summary) -> Result<()> {
    let path = ctx.path("adev.csv");
    io::write_adev(&path, &report.points)?;
    s.text("adev_file", path.display().to_string());
    if let Some(p) = report.points.iter().find(|p| (p.tau - 1.0).abs() < 1e-9) {
        s.num("adev_1s", p.adev, "T");
    }
    if let (Some(first), Some(last)) = (report.points.first(), report.points.last()) {
        if let Ok(slope) = loglog_slope(&report.points, first.tau, last.tau) {
            s.num("adev_loglog_slope", slope, "");
        }
    }
    if ctx.plot {
        let pts = report
            .points
            .iter()
            .map(|p| (p.tau, p.adev * 1e12))
            .collect();
        line_chart(
            &ctx.path("adev.svg"),
            "Overlapping Allan deviation",
            "τ (s)",
            "ADEV (pT)",
            Axes {
                log_x: true,
                log_y: true,
            },
            &[Series {
                label: "ADEV",
                points: pts,
            }],
        );
    }
    Ok(())
}

pub fn analyze(ctx: &Context, input: &Path) -> Result<Summary> {
    let cfg = &ctx.config;
    let a = &cfg.analysis;
    let trace = to_field(io::read_trace(input)?, cfg)?;
    let fs = trace.sampling_frequency();
    ctx.prepare()?;
    let mut s = Summary::default();
    s.num("samples", trace.len() as f64, "")
        .num("sampling_frequency", fs, "Hz")
        .num("duration", trace.duration(), "s");

    if a.asd {
        if a.asd_segments == 0 {
            return Err(CliError::Config(
                "[analysis] asd_segments must be positive".into(),
            ));
        }
        let seg = trace.len() / a.asd_segments;
        let spec = asd_with(&trace, seg, a.asd_segments, a.window())?;
        let path = ctx.path("spectrum.csv");
        io::write_spectrum(&path, &spec, Units::Tesla)?;
        let (f_peak, d_peak) = spec.peak();
        s.text("spectrum_file", path.display().to_string())
            .num("asd_resolution", spec.resolution_bw, "Hz")
            .num("asd_peak_frequency", f_peak, "Hz")
            .num("asd_peak_density", d_peak, "T/√Hz");
        if let Ok(floor) = band_average(
            &spec,
            5.0_f64.max(spec.resolution_bw),
            (fs / 2.0).min(100.0),
        ) {
            s.num("asd_band_rms", floor, "T/√Hz");
        }
        if ctx.plot {
            let pts = spec
                .frequencies
                .iter()
                .zip(&spec.density)
                .skip(1)
                .map(|(f, d)| (*f, d * 1e12))
                .collect();
            line_chart(
                &ctx.path("spectrum.svg"),
                "Amplitude spectral density",
                "frequency (Hz)",
                "ASD (pT/√Hz)",
                Axes {
                    log_x: false,
                    log_y: true,
                },
                &[Series {
                    label: "ASD",
                    points: pts,
                }],
            );
        }
    }

    if a.sensitivity {
        let (chain, mode) = cfg.filters.to_chain(fs)?;
        let f_nep = integrated_nep(&FilterSpec::Chain(chain.clone(), mode), fs)?;
        let filtered = apply_filter_chain_with(&trace, &chain, mode)?;
        let rep = sensitivity(&filtered, f_nep)?;
        s.num("filtered_std", rep.trace_std, "T")
            .num("filter_nep_bandwidth", f_nep, "Hz")
            .num("sensitivity", rep.eta, "T/√Hz");
    }

    if a.adev {
        let report = adev_for(ctx, &trace)?;
        adev_outputs(ctx, &report, &mut s)?;
    }
    ctx.write_summary("analysis", &s)?;
    Ok(s)
}

pub fn adev(ctx: &Context, input: &Path) -> Result<Summary> {
    let trace = to_field(io::read_trace(input)?, &ctx.config)?;
    ctx.prepare()?;
    let report = adev_for(ctx, &trace)?;
    let mut s = Summary::default();
    s.num("points", report.points.len() as f64, "")
        .num("skipped", report.skipped.len() as f64, "");
    adev_outputs(ctx, &report, &mut s)?;
    ctx.write_summary("adev_summary", &s)?;
    Ok(s)
}

pub fn fit_odmr(ctx: &Context, input: Option<&Path>) -> Result<Summary> {
    let cfg = &ctx.config;
    let o = &cfg.odmr;
    let splitting = cfg.sensor.hyperfine_splitting_hz;
    ctx.prepare()?;
    let mut s = Summary::default();
    let data = match input {
        Some(p) => {
            s.text("input", p.display().to_string());
            io::read_odmr(p)?
        }
        None => {
            let peaks = three_tone_peaks(splitting, o.fwhm_hz, o.central_slope_a_per_hz)?;
            let spec =
                synthetic_spectrum(&peaks, o.half_span_hz, o.n_points, o.rel_noise, cfg.seed)?;
            let path = ctx.path("odmr.csv");
            io::write_odmr(&path, &spec)?;
            s.text("input", format!("synthetic, written to {}", path.display()));
            spec
        }
    };
    let fit = fit_odmr_spectrum(&data, splitting, &o.fit_options())?;
    s.text("converged", fit.result.converged.to_string())
        .num("iterations", fit.result.n_iterations as f64, "")
        .num("residual_norm", fit.result.residual_norm, "A");
    for (k, p) in fit.peaks.iter().enumerate() {
        s.num(&format!("peak{k}_center"), p.center, "Hz")
            .num(&format!("peak{k}_fwhm"), p.fwhm, "Hz")
            .num(&format!("peak{k}_amplitude"), p.amplitude, "A");
    }
    s.num("central_slope", fit.central_slope(), "A/Hz");
    let window = o
        .window_hz
        .unwrap_or(DEFAULT_WINDOW_FRACTION * fit.peaks[2].fwhm);
    match fit_zero_crossing(&data, window) {
        Ok(z) => {
            s.num("zero_crossing_slope", z.slope, "A/Hz").num(
                "zero_crossing",
                z.zero_crossing(),
                "Hz",
            );
        }
        Err(e) => log::warn!("zero-crossing regression skipped: {e}"),
    }
    let model =
        OdmrSpectrum::from_model(data.detunings().to_vec(), &fit.peaks, vec![0.0; data.len()])?;
    io::write_odmr(&ctx.path("odmr_fit.csv"), &model)?;
    if ctx.plot {
        let pts = |sp: &OdmrSpectrum| {
            sp.detunings()
                .iter()
                .zip(sp.demod_current())
                .map(|(x, y)| (x / 1e6, y * 1e9))
                .collect()
        };
        line_chart(
            &ctx.path("odmr.svg"),
            "ODMR spectrum",
            "detuning (MHz)",
            "demodulated current (nA)",
            Axes::default(),
            &[
                Series {
                    label: "data",
                    points: pts(&data),
                },
                Series {
                    label: "fit",
                    points: pts(&model),
                },
            ],
        );
    }
    ctx.write_summary("odmr_fit", &s)?;
    Ok(s)
}

pub fn noise_budget(ctx: &Context, input: Option<&Path>) -> Result<Summary> {
    let cfg = &ctx.config;
    let sensor = cfg.sensor.to_sensor()?;
    let mut budget = cfg.budget.to_budget()?;
    ctx.prepare()?;
    let mut s = Summary::default();
    if let Some(p) = input {
        let data = io::read_noise_data(p)?;
        let fit = fit_noise_model(&data, budget.n_elec, &NoiseFitOptions::default())?;
        s.text("input", p.display().to_string())
            .num("p1", fit.budget.p1, "A/Hz")
            .num("p2", fit.budget.p2, "1/Hz");
        if let Some(se) = fit.result.std_errors() {
            s.num("p1_std", se[0], "A/Hz").num("p2_std", se[1], "1/Hz");
        }
        budget = fit.budget;
    }
    let i = sensor.fl_photocurrent;
    let total = budget.density(i);
    s.num("photocurrent", i, "A")
        .num("electrical_noise", budget.n_elec, "A/√Hz")
        .num("shot_noise", budget.shot_component(i), "A/√Hz")
        .num("intensity_noise", budget.intensity_component(i), "A/√Hz")
        .num("total_noise", total, "A/√Hz")
        .num("balanced_shot_limit", shot_noise_density(i, true)?, "A/√Hz")
        .num(
            "field_noise_floor",
            field_noise_floor(total, sensor.zero_crossing_slope, sensor.gyromagnetic_ratio)?,
            "T/√Hz",
        )
        .num(
            "shot_limited_field_noise",
            field_noise_floor(
                shot_noise_density(i, true)?,
                sensor.zero_crossing_slope,
                sensor.gyromagnetic_ratio,
            )?,
            "T/√Hz",
        );
    match equivalent_photocurrent(&budget) {
        Ok((v, u)) => {
            s.num("equivalent_photocurrent", v, "A")
                .num("equivalent_photocurrent_std", u, "A");
        }
        Err(e) => log::warn!("equivalent photocurrent undefined: {e}"),
    }
    let curve: Vec<NoiseDatum> = reproduce::sweep_currents()
        .into_iter()
        .map(|c| NoiseDatum::new(c, budget.density(c)))
        .collect();
    io::write_noise_data(&ctx.path("noise_model.csv"), &curve)?;
    if ctx.plot {
        let pts = curve
            .iter()
            .map(|d| (d.i_fl * 1e3, d.n_far * 1e12))
            .collect();
        line_chart(
            &ctx.path("noise_model.svg"),
            "Far-detuned noise",
            "photocurrent (mA)",
            "noise (pA/√Hz)",
            Axes::default(),
            &[Series {
                label: "model",
                points: pts,
            }],
        );
    }
    ctx.write_summary("noise_budget", &s)?;
    Ok(s)
}

/// Filter choices for the `nep` subcommand.
#[derive(Debug, Clone, PartialEq)]
pub enum NepTarget {
    /// The configured notch and band-pass chain.
    Chain,
    /// The lock-in cascade at the calibrated (or configured) order.
    Lockin,
    OnePole(f64),
    BrickWall(f64, f64),
}

impl std::str::FromStr for NepTarget {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let bad =
            || format!("expected chain, lockin, one-pole:<f3db> or brick:<lo>:<hi>, got `{s}`");
        let num = |v: &str| v.parse::<f64>().map_err(|_| bad());
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["chain"] => Ok(NepTarget::Chain),
            ["lockin"] => Ok(NepTarget::Lockin),
            ["one-pole", f] => Ok(NepTarget::OnePole(num(f)?)),
            ["brick", lo, hi] => Ok(NepTarget::BrickWall(num(lo)?, num(hi)?)),
            _ => Err(bad()),
        }
    }
}

pub fn nep(ctx: &Context, target: &NepTarget) -> Result<Summary> {
    let cfg = &ctx.config;
    let a = &cfg.analysis;
    let mut fs = cfg.sensor.sampling_frequency_hz;
    let spec = match *target {
        NepTarget::Chain => {
            let (chain, mode) = cfg.filters.to_chain(fs)?;
            FilterSpec::Chain(chain, mode)
        }
        NepTarget::Lockin => {
            let order = cfg
                .synth_spec()
                .ok()
                .and_then(|s| s.lockin_order)
                .map_or_else(
                    || {
                        nvmag_core::synth::calibrate_order(
                            cfg.sensor.lockin_f3db_hz,
                            cfg.sensor.lockin_nep_bw_hz,
                        )
                    },
                    Ok,
                )?;
            // the analog filter is rendered well above its cutoff
            fs = 1000.0 * cfg.sensor.lockin_f3db_hz;
            FilterSpec::Lockin(OnePoleCascade::new(cfg.sensor.lockin_f3db_hz, order)?)
        }
        NepTarget::OnePole(f3db) => FilterSpec::OnePole { f3db },
        NepTarget::BrickWall(f_lo, f_hi) => FilterSpec::BrickWall { f_lo, f_hi },
    };
    let est = nep_bandwidth(&spec, fs, a.nep_samples, a.nep_trials, cfg.seed)?;
    let mut s = Summary::default();
    s.num("sampling_frequency", fs, "Hz")
        .num("nep_bandwidth", est.value, "Hz")
        .num("nep_std_error", est.std_error, "Hz")
        .num("trials", est.trials as f64, "");
    if est.degenerate {
        s.text("degenerate", "true");
    }
    if let Ok(v) = integrated_nep(&spec, fs) {
        s.num("nep_integral", v, "Hz");
    }
    ctx.prepare()?;
    ctx.write_summary("nep", &s)?;
    Ok(s)
}

pub fn reproduce(ctx: &Context) -> Result<ReproReport> {
    let report = reproduce::run(&ctx.config);
    ctx.prepare()?;
    io::write_json(&ctx.path("reproduce.json"), &report)?;
    if ctx.format == Format::Csv {
        let path = ctx.path("reproduce.csv");
        let mut w =
            csv::Writer::from_path(&path).map_err(|e| CliError::format(&path, e.to_string()))?;
        let err = |e: csv::Error| CliError::format(&path, e.to_string());
        w.write_record([
            "id",
            "quantity",
            "unit",
            "expected",
            "computed",
            "tolerance",
            "pass",
            "note",
        ])
        .map_err(err)?;
        for r in &report.rows {
            w.write_record([
                r.id.clone(),
                r.quantity.clone(),
                r.unit.clone(),
                format!("{:.16e}", r.expected),
                r.computed.map_or(String::new(), |v| format!("{v:.16e}")),
                r.check.to_string(),
                r.pass.to_string(),
                r.note.clone().unwrap_or_default(),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| CliError::io(&path, e))?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nep_target_parsing() {
        assert_eq!("chain".parse::<NepTarget>().unwrap(), NepTarget::Chain);
        assert_eq!(
            "one-pole:10".parse::<NepTarget>().unwrap(),
            NepTarget::OnePole(10.0)
        );
        assert_eq!(
            "brick:5:100".parse::<NepTarget>().unwrap(),
            NepTarget::BrickWall(5.0, 100.0)
        );
        assert!("brick:5".parse::<NepTarget>().is_err());
        assert!("one-pole:x".parse::<NepTarget>().is_err());
    }

    #[test]
    fn zero_slope_ampere_trace_is_config_error() {
        let mut c = RunConfig::published();
        c.sensor.zero_crossing_slope_a_per_hz = 0.0;
        let t = TimeTrace::new(vec![1e-9; 10], 400.0, Units::Ampere).unwrap();
        assert!(matches!(to_field(t, &c), Err(CliError::Config(_))));
    }

    #[test]
    fn ampere_trace_converts_through_response() {
        let c = RunConfig::published();
        let r = 28.0e9 * 332e-12;
        let t = TimeTrace::new(vec![r * 1e-12; 4], 400.0, Units::Ampere).unwrap();
        let f = to_field(t, &c).unwrap();
        assert_eq!(f.units(), Units::Tesla);
        assert!((f.samples()[0] - 1e-12).abs() < 1e-24);
    }
}
