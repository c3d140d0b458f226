//! CSV readers and writers for traces, spectra, Allan tables, noise data and
//! ODMR spectra.
//!
//! Floats are written as `{:.16e}` (17 significant digits), so every file
//! reads back to the same bits. Metadata lives in a single `# key=value ...`
//! line above the column header.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nvmag_core::dsp::AmplitudeSpectrum;
use nvmag_core::noise::NoiseDatum;
use nvmag_core::odmr::OdmrSpectrum;
use nvmag_core::stability::AdevPoint;
use nvmag_core::{TimeTrace, Units};

use crate::error::{CliError, Result};

pub const TRACE_HEADER: [&str; 2] = ["time_s", "value"];
pub const SPECTRUM_HEADER: [&str; 2] = ["freq_hz", "density"];
pub const ADEV_HEADER: [&str; 4] = ["tau_s", "adev_t", "stderr_t", "n_pairs"];
pub const NOISE_HEADER: [&str; 3] = ["i_fl_a", "n_far_a_sqrthz", "rel_unc"];
pub const ODMR_HEADER: [&str; 2] = ["detuning_hz", "demod_current_a"];

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

struct Table {
    meta: Vec<(String, String)>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn meta(&self, path: &Path, key: &str) -> Result<&str> {
        self.meta
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| CliError::format(path, format!("missing `{key}` in the # header")))
    }

    fn meta_f64(&self, path: &Path, key: &str) -> Result<f64> {
        let v = self.meta(path, key)?;
        v.parse()
            .map_err(|_| CliError::format(path, format!("`{key}={v}` is not a number")))
    }
}

fn read_table(path: &Path, header: &[&str]) -> Result<Table> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut meta = Vec::new();
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        for pair in line[1..].split_whitespace() {
            let (k, v) = pair.split_once('=').ok_or_else(|| {
                CliError::format(path, format!("malformed header entry `{pair}`"))
            })?;
            meta.push((k.to_string(), v.to_string()));
        }
    }
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let got = rdr
        .headers()
        .map_err(|e| CliError::format(path, e.to_string()))?
        .clone();
    if got.iter().ne(header.iter().copied()) {
        return Err(CliError::format(
            path,
            format!(
                "expected columns {}, found {}",
                header.join(","),
                got.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    let rows = rdr
        .records()
        .map(|r| {
            r.map(|rec| rec.iter().map(str::to_string).collect())
                .map_err(|e| CliError::format(path, e.to_string()))
        })
        .collect::<Result<Vec<Vec<String>>>>()?;
    Ok(Table { meta, rows })
}

fn write_table(
    path: &Path,
    meta: &str,
    header: &[&str],
    rows: impl Iterator<Item = Vec<String>>,
) -> Result<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut out = BufWriter::new(file);
    if !meta.is_empty() {
        writeln!(out, "# {meta}").map_err(|e| CliError::io(path, e))?;
    }
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| CliError::format(path, e.to_string());
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn parse_f64(path: &Path, row: usize, s: &str) -> Result<f64> {
    s.parse()
        .map_err(|_| CliError::format(path, format!("row {}: `{s}` is not a number", row + 1)))
}

fn columns<const N: usize>(path: &Path, table: &Table) -> Result<Vec<[f64; N]>> {
    table
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut out = [0.0; N];
            for (o, s) in out.iter_mut().zip(r) {
                *o = parse_f64(path, i, s)?;
            }
            Ok(out)
        })
        .collect()
}

pub fn write_trace(path: &Path, trace: &TimeTrace) -> Result<()> {
    let meta = format!(
        "fs_hz={} units={}",
        num(trace.sampling_frequency()),
        trace.units().as_str()
    );
    let rows = trace
        .samples()
        .iter()
        .enumerate()
        .map(|(i, v)| vec![num(trace.time(i)), num(*v)]);
    write_table(path, &meta, &TRACE_HEADER, rows)
}

/// The start time is taken from the first row; the time column is otherwise
/// implied by `fs_hz`.
pub fn read_trace(path: &Path) -> Result<TimeTrace> {
    let table = read_table(path, &TRACE_HEADER)?;
    let fs = table.meta_f64(path, "fs_hz")?;
    let units_str = table.meta(path, "units")?;
    let units = Units::parse(units_str)
        .ok_or_else(|| CliError::format(path, format!("unknown units `{units_str}`")))?;
    let rows = columns::<2>(path, &table)?;
    let start = rows.first().map_or(0.0, |r| r[0]);
    let samples = rows.iter().map(|r| r[1]).collect();
    TimeTrace::with_start(samples, fs, units, start)
        .map_err(|e| CliError::format(path, e.to_string()))
}

pub fn write_spectrum(path: &Path, spectrum: &AmplitudeSpectrum, units: Units) -> Result<()> {
    let u = match units {
        Units::Tesla => "t_per_sqrthz",
        Units::Ampere => "a_per_sqrthz",
    };
    let meta = format!(
        "units={u} rbw_hz={} n_avg={}",
        num(spectrum.resolution_bw),
        spectrum.n_averages
    );
    let rows = spectrum
        .frequencies
        .iter()
        .zip(&spectrum.density)
        .map(|(f, d)| vec![num(*f), num(*d)]);
    write_table(path, &meta, &SPECTRUM_HEADER, rows)
}

pub fn read_spectrum(path: &Path) -> Result<(AmplitudeSpectrum, Units)> {
    let table = read_table(path, &SPECTRUM_HEADER)?;
    let units = match table.meta(path, "units")? {
        "t_per_sqrthz" => Units::Tesla,
        "a_per_sqrthz" => Units::Ampere,
        other => return Err(CliError::format(path, format!("unknown units `{other}`"))),
    };
    let rbw = table.meta_f64(path, "rbw_hz")?;
    let n_avg: usize = table
        .meta(path, "n_avg")?
        .parse()
        .map_err(|_| CliError::format(path, "n_avg is not an integer"))?;
    let rows = columns::<2>(path, &table)?;
    let spectrum = AmplitudeSpectrum::new(
        rows.iter().map(|r| r[0]).collect(),
        rows.iter().map(|r| r[1]).collect(),
        n_avg,
        rbw,
    )
    .map_err(|e| CliError::format(path, e.to_string()))?;
    Ok((spectrum, units))
}

pub fn write_adev(path: &Path, points: &[AdevPoint]) -> Result<()> {
    let rows = points.iter().map(|p| {
        vec![
            num(p.tau),
            num(p.adev),
            num(p.std_error),
            p.n_pairs.to_string(),
        ]
    });
    write_table(path, "", &ADEV_HEADER, rows)
}

pub fn read_adev(path: &Path) -> Result<Vec<AdevPoint>> {
    let table = read_table(path, &ADEV_HEADER)?;
    table
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            Ok(AdevPoint {
                tau: parse_f64(path, i, &r[0])?,
                adev: parse_f64(path, i, &r[1])?,
                std_error: parse_f64(path, i, &r[2])?,
                n_pairs: r[3].parse().map_err(|_| {
                    CliError::format(path, format!("row {}: bad n_pairs `{}`", i + 1, r[3]))
                })?,
            })
        })
        .collect()
}

pub fn write_noise_data(path: &Path, data: &[NoiseDatum]) -> Result<()> {
    let rows = data
        .iter()
        .map(|d| vec![num(d.i_fl), num(d.n_far), num(d.rel_uncertainty)]);
    write_table(path, "", &NOISE_HEADER, rows)
}

pub fn read_noise_data(path: &Path) -> Result<Vec<NoiseDatum>> {
    let table = read_table(path, &NOISE_HEADER)?;
    Ok(columns::<3>(path, &table)?
        .into_iter()
        .map(|[i_fl, n_far, rel_uncertainty]| NoiseDatum {
            i_fl,
            n_far,
            rel_uncertainty,
        })
        .collect())
}

pub fn write_odmr(path: &Path, spectrum: &OdmrSpectrum) -> Result<()> {
    let rows = spectrum
        .detunings()
        .iter()
        .zip(spectrum.demod_current())
        .map(|(x, y)| vec![num(*x), num(*y)]);
    write_table(path, "", &ODMR_HEADER, rows)
}

pub fn read_odmr(path: &Path) -> Result<OdmrSpectrum> {
    let table = read_table(path, &ODMR_HEADER)?;
    let rows = columns::<2>(path, &table)?;
    OdmrSpectrum::new(
        rows.iter().map(|r| r[0]).collect(),
        rows.iter().map(|r| r[1]).collect(),
    )
    .map_err(|e| CliError::format(path, e.to_string()))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_header_is_required() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        std::fs::write(&p, "time_s,value\n0,1\n").unwrap();
        assert!(matches!(read_trace(&p), Err(CliError::Format { .. })));
        std::fs::write(&p, "# fs_hz=400 units=gauss\ntime_s,value\n0,1\n").unwrap();
        assert!(read_trace(&p).is_err());
    }

    #[test]
    fn wrong_columns_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("n.csv");
        std::fs::write(&p, "i,n\n1,2\n").unwrap();
        assert!(read_noise_data(&p).is_err());
    }

    #[test]
    fn non_numeric_cell() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("o.csv");
        std::fs::write(&p, "detuning_hz,demod_current_a\n0,abc\n1,2\n").unwrap();
        let e = read_odmr(&p).unwrap_err().to_string();
        assert!(e.contains("row 1"), "{e}");
    }
}
