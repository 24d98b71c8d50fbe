//! Signal-of-interest and interference synthesis.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{Op, Seed};
use crate::signal::Waveform;

/// Windowed-sinc length in units of the cutoff period: taps ≈ span / bandwidth / dt.
pub const DEFAULT_FIR_SPAN: f64 = 10.0;
const MAX_FIR_HALF_LEN: usize = 16_384;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SoiKind {
    BinaryNrz,
    /// Real projection of 16-QAM, i.e. 4-PAM on {±1, ±3}/√5.
    Qam16Real,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SoiSpec {
    pub kind: SoiKind,
    pub bit_rate: f64,
    pub n_bits: usize,
    pub samples_per_bit: usize,
    pub amplitude: f64,
}

impl SoiSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.bit_rate > 0.0 && self.bit_rate.is_finite()) {
            return Err(Error::InvalidSpec(format!("bit_rate must be positive, got {}", self.bit_rate)));
        }
        if self.n_bits == 0 || self.samples_per_bit == 0 {
            return Err(Error::InvalidSpec("n_bits and samples_per_bit must be >= 1".into()));
        }
        if !self.amplitude.is_finite() {
            return Err(Error::InvalidSpec("amplitude must be finite".into()));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        1.0 / (self.bit_rate * self.samples_per_bit as f64)
    }

    pub fn bit_period(&self) -> f64 {
        1.0 / self.bit_rate
    }

    /// Symbol alphabet, ordered ascending.
    pub fn levels(&self) -> Vec<f64> {
        match self.kind {
            SoiKind::BinaryNrz => vec![-self.amplitude, self.amplitude],
            SoiKind::Qam16Real => {
                let a = self.amplitude / 5f64.sqrt();
                vec![-3.0 * a, -a, a, 3.0 * a]
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterferenceSpec {
    pub bandwidth: f64,
    pub rms: f64,
    #[serde(default = "default_fir_span")]
    pub fir_span: f64,
}

fn default_fir_span() -> f64 {
    DEFAULT_FIR_SPAN
}

impl InterferenceSpec {
    pub fn new(bandwidth: f64, rms: f64) -> Self {
        Self {
            bandwidth,
            rms,
            fir_span: DEFAULT_FIR_SPAN,
        }
    }

    pub fn validate(&self, dt: f64) -> Result<()> {
        let nyquist = 0.5 / dt;
        if self.bandwidth <= 0.0 || self.bandwidth.is_nan() {
            return Err(Error::InvalidSpec(format!("interference bandwidth must be positive, got {}", self.bandwidth)));
        }
        if self.bandwidth > nyquist * (1.0 + 1e-12) {
            return Err(Error::InvalidSpec(format!(
                "interference bandwidth {:e} Hz exceeds grid Nyquist {:e} Hz",
                self.bandwidth, nyquist
            )));
        }
        if !(self.rms >= 0.0 && self.rms.is_finite()) {
            return Err(Error::InvalidSpec(format!("interference rms must be >= 0, got {}", self.rms)));
        }
        if !(self.fir_span > 0.0 && self.fir_span.is_finite()) {
            return Err(Error::InvalidSpec("fir_span must be positive".into()));
        }
        Ok(())
    }
}

/// Symbol sequence for `spec`, one value per bit.
pub fn soi_symbols(spec: &SoiSpec, seed: Seed) -> Result<Vec<f64>> {
    spec.validate()?;
    let levels = spec.levels();
    let mut rng = seed.rng(Op::Soi, 0);
    Ok((0..spec.n_bits)
        .map(|_| levels[rng.random_range(0..levels.len())])
        .collect())
}

/// NRZ waveform: each symbol held for `samples_per_bit` samples.
pub fn gen_soi(spec: &SoiSpec, seed: Seed) -> Result<Waveform> {
    let symbols = soi_symbols(spec, seed)?;
    let samples = symbols
        .iter()
        .flat_map(|&s| std::iter::repeat_n(s, spec.samples_per_bit))
        .collect();
    Waveform::new(spec.dt(), samples, "s_soi")
}

/// Band-limited Gaussian interference on the grid `dt`, covering `duration`.
///
/// White Gaussian noise is passed through a linear-phase Hamming-windowed sinc
/// low-pass with cutoff `bandwidth`. Only fully-overlapped output samples are
/// kept, so there is no filter transient. The result has its empirical mean
/// removed and is rescaled to an empirical rms of exactly `spec.rms`.
pub fn gen_interference(spec: &InterferenceSpec, duration: f64, dt: f64, seed: Seed) -> Result<Waveform> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidSpec(format!("dt must be positive, got {dt}")));
    }
    spec.validate(dt)?;
    let n = (duration / dt).round() as usize;
    if n == 0 {
        return Err(Error::InvalidSpec(format!("duration {duration:e} s is shorter than one sample")));
    }
    if spec.rms == 0.0 {
        return Waveform::new(dt, vec![0.0; n], "s_int");
    }

    let taps = lowpass_taps(spec.bandwidth * dt, spec.fir_span);
    let mut rng = seed.rng(Op::Interference, 0);
    let white: Vec<f64> = (0..n + taps.len() - 1)
        .map(|_| rng.sample(StandardNormal))
        .collect();
    let mut out = fir_valid(&white, &taps);

    let mean = out.iter().sum::<f64>() / n as f64;
    out.iter_mut().for_each(|v| *v -= mean);
    let rms = (out.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    let gain = if rms > 0.0 { spec.rms / rms } else { 0.0 };
    out.iter_mut().for_each(|v| *v *= gain);
    Waveform::new(dt, out, "s_int")
}

/// Hamming-windowed sinc low-pass, unit DC gain. `cutoff` is in cycles/sample.
pub fn lowpass_taps(cutoff: f64, span: f64) -> Vec<f64> {
    let cutoff = cutoff.min(0.5);
    let half = ((span / (2.0 * cutoff)).ceil() as usize).clamp(1, MAX_FIR_HALF_LEN);
    let len = 2 * half + 1;
    let mut taps: Vec<f64> = (0..len)
        .map(|i| {
            let m = i as f64 - half as f64;
            let x = 2.0 * cutoff * m;
            let sinc = if m == 0.0 {
                1.0
            } else {
                (std::f64::consts::PI * x).sin() / (std::f64::consts::PI * x)
            };
            let window = 0.54 + 0.46 * (std::f64::consts::PI * m / half as f64).cos();
            2.0 * cutoff * sinc * window
        })
        .collect();
    let dc: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= dc);
    taps
}

// Fully-overlapped convolution; the taps are symmetric so no reversal is needed.
fn fir_valid(input: &[f64], taps: &[f64]) -> Vec<f64> {
    let n = input.len() + 1 - taps.len();
    (0..n)
        .map(|i| {
            input[i..i + taps.len()]
                .iter()
                .zip(taps)
                .map(|(x, h)| x * h)
                .sum()
        })
        .collect()
}
