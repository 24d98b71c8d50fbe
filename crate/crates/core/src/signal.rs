//! Sampled signal containers shared by every stage.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniformly sampled real signal. Sample `k` sits at time `k * dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waveform {
    dt: f64,
    samples: Vec<f64>,
    pub label: String,
}

impl Waveform {
    pub fn new(dt: f64, samples: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidSpec(format!("sample period must be positive, got {dt}")));
        }
        if samples.is_empty() {
            return Err(Error::EmptyInput("waveform samples"));
        }
        if let Some(k) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec(format!("non-finite sample at index {k}")));
        }
        Ok(Self {
            dt,
            samples,
            label: label.into(),
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.dt * self.samples.len() as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    /// Same grid, new samples. The caller guarantees finiteness.
    pub(crate) fn with_samples(&self, samples: Vec<f64>, label: impl Into<String>) -> Self {
        debug_assert_eq!(samples.len(), self.samples.len());
        Self {
            dt: self.dt,
            samples,
            label: label.into(),
        }
    }

    pub fn same_grid(&self, other: &Waveform) -> Result<()> {
        if self.len() != other.len() || self.dt != other.dt {
            return Err(Error::Shape(format!(
                "`{}` ({} samples, dt {:e}) vs `{}` ({} samples, dt {:e})",
                self.label,
                self.len(),
                self.dt,
                other.label,
                other.len(),
                other.dt
            )));
        }
        Ok(())
    }

    pub fn scaled(&self, gain: f64) -> Waveform {
        self.with_samples(self.samples.iter().map(|v| v * gain).collect(), self.label.clone())
    }
}

/// Undersampled `(time, value)` pairs, one per sampling pulse.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SampleStream {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl SampleStream {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Shape(format!(
                "{} times vs {} values",
                times.len(),
                values.len()
            )));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Shape("sample times must be strictly increasing".into()));
        }
        Ok(Self { times, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn same_times(&self, other: &SampleStream) -> Result<()> {
        if self.times != other.times {
            return Err(Error::Shape(format!(
                "sample streams on different time grids ({} vs {} samples)",
                self.len(),
                other.len()
            )));
        }
        Ok(())
    }

    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> SampleStream {
        SampleStream {
            times: self.times.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}
