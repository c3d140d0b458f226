use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Physical unit of a [`TimeTrace`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Units {
    /// Demodulated photocurrent.
    Ampere,
    /// Magnetic field.
    Tesla,
}

impl Units {
    pub fn as_str(self) -> &'static str {
        match self {
            Units::Ampere => "ampere",
            Units::Tesla => "tesla",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ampere" => Some(Units::Ampere),
            "tesla" => Some(Units::Tesla),
            _ => None,
        }
    }
}

/// Uniformly sampled real time series.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeTrace {
    samples: Vec<f64>,
    sampling_frequency: f64,
    units: Units,
    start_time: f64,
}

impl TimeTrace {
    pub fn new(samples: Vec<f64>, sampling_frequency: f64, units: Units) -> Result<Self> {
        Self::with_start(samples, sampling_frequency, units, 0.0)
    }

    pub fn with_start(
        samples: Vec<f64>,
        sampling_frequency: f64,
        units: Units,
        start_time: f64,
    ) -> Result<Self> {
        if !(sampling_frequency > 0.0 && sampling_frequency.is_finite()) {
            return Err(Error::invalid(
                "sampling frequency must be positive and finite",
            ));
        }
        if samples.is_empty() {
            return Err(Error::invalid("trace must contain at least one sample"));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(alloc::format!("sample {i} is not finite")));
        }
        if !start_time.is_finite() {
            return Err(Error::invalid("start time must be finite"));
        }
        Ok(Self {
            samples,
            sampling_frequency,
            units,
            start_time,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sampling_frequency(&self) -> f64 {
        self.sampling_frequency
    }

    pub fn units(&self) -> Units {
        self.units
    }

    pub fn start_time(&self) -> f64 {
        self.start_time
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sampling_frequency
    }

    /// Time stamp of sample `i`.
    pub fn time(&self, i: usize) -> f64 {
        self.start_time + i as f64 / self.sampling_frequency
    }

    /// Same metadata, new samples. Used by the filters, which preserve length.
    pub(crate) fn with_samples(&self, samples: Vec<f64>) -> Self {
        debug_assert_eq!(samples.len(), self.samples.len());
        Self {
            samples,
            sampling_frequency: self.sampling_frequency,
            units: self.units,
            start_time: self.start_time,
        }
    }

    /// Multiply every sample by `factor` and relabel the units.
    pub fn rescaled(&self, factor: f64, units: Units) -> Result<Self> {
        let samples: Vec<f64> = self.samples.iter().map(|v| v * factor).collect();
        Self::with_start(samples, self.sampling_frequency, units, self.start_time)
    }

    pub fn mean(&self) -> f64 {
        mean(&self.samples)
    }

    /// Sample standard deviation (n − 1 normalization); zero for one sample.
    pub fn std_dev(&self) -> f64 {
        sample_std(&self.samples)
    }
}

pub(crate) fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

pub(crate) fn sample_std(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    let ss: f64 = x.iter().map(|v| (v - m) * (v - m)).sum();
    libm::sqrt(ss / (x.len() - 1) as f64)
}
