//! Photodetector saturation and noise model.
//!
//! Peak voltage for average optical power `P`:
//!
//! ```text
//! V(P) = slope · P_sp · (1 − exp(−P / P_sp)) + N(0, σ²)
//! ```
//!
//! where `P_sp` is the pulsed saturation power derived from the CW saturation
//! power and the impulse-response duty ratio `t_FWHM / t_p`. The curve is
//! linear for `P ≪ P_sp` and keeps rising, compressed, above it.
//!
//! SNR is the ratio of the mean peak voltage to its standard deviation,
//! expressed as `10·log10(mean / std)`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{normal_at, Op, Seed};
use crate::signal::SampleStream;

/// Reference operating points for the two-point noise calibration: (dBm, SNR dB).
pub const SNR_ANCHORS: [(f64, f64); 2] = [(-10.0, 39.0), (-41.0, 7.8)];

/// Peak-voltage slope in the linear region for the reference detector.
pub const REFERENCE_SLOPE_V_PER_MW: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorParams {
    pub p_scw_dbm: f64,
    pub t_fwhm_s: f64,
    pub pulse_period_s: f64,
    pub slope_v_per_mw: f64,
    pub noise_sigma_v: f64,
}

impl DetectorParams {
    /// 16 dBm CW saturation, 90 ps impulse response, 37 MHz repetition, noise
    /// calibrated against [`SNR_ANCHORS`].
    pub fn reference() -> Self {
        let uncalibrated = DetectorParams {
            p_scw_dbm: 16.0,
            t_fwhm_s: 90e-12,
            pulse_period_s: 1.0 / 37e6,
            slope_v_per_mw: REFERENCE_SLOPE_V_PER_MW,
            noise_sigma_v: 1.0,
        };
        calibrate_noise(&uncalibrated, &SNR_ANCHORS)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.p_scw_dbm.is_finite()
            && self.t_fwhm_s > 0.0
            && self.pulse_period_s > self.t_fwhm_s
            && self.pulse_period_s.is_finite()
            && self.slope_v_per_mw > 0.0
            && self.slope_v_per_mw.is_finite()
            && self.noise_sigma_v >= 0.0
            && self.noise_sigma_v.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSpec(format!("invalid detector parameters {self:?}")))
        }
    }

    pub fn saturation_mw(&self) -> f64 {
        dbm_to_mw(saturation_avg_power_dbm(self))
    }

    /// Asymptotic peak voltage, `slope · P_sp`.
    pub fn ceiling_v(&self) -> f64 {
        self.slope_v_per_mw * self.saturation_mw()
    }
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

/// Average pulsed power that saturates the detector: `P_scw · t_FWHM / t_p`, in dBm.
pub fn saturation_avg_power_dbm(d: &DetectorParams) -> f64 {
    d.p_scw_dbm + 10.0 * (d.t_fwhm_s / d.pulse_period_s).log10()
}

fn response_mw(p_mw: f64, d: &DetectorParams) -> f64 {
    let psp = d.saturation_mw();
    -d.slope_v_per_mw * psp * (-p_mw / psp).exp_m1()
}

/// Noiseless peak voltage at `avg_power_dbm`.
pub fn response_noiseless(avg_power_dbm: f64, d: &DetectorParams) -> f64 {
    response_mw(dbm_to_mw(avg_power_dbm), d)
}

/// One noisy peak-voltage reading.
pub fn respond(avg_power_dbm: f64, d: &DetectorParams, seed: Seed) -> f64 {
    let mut rng = seed.rng(Op::DetectorResponse, 0);
    response_noiseless(avg_power_dbm, d) + d.noise_sigma_v * normal_at(&mut rng, 0)
}

/// Inverse of the noiseless response, in mW. Readings at or above the
/// ceiling are clamped just below it.
pub fn invert_response_mw(v: f64, d: &DetectorParams) -> f64 {
    let psp = d.saturation_mw();
    let ratio = (v / d.ceiling_v()).min(1.0 - 1e-12);
    -psp * (-ratio).ln_1p()
}

/// Relative shortfall of the noiseless response below the linear model `slope·P`.
pub fn linearity_deviation(avg_power_dbm: f64, d: &DetectorParams) -> f64 {
    let p = dbm_to_mw(avg_power_dbm);
    1.0 - response_mw(p, d) / (d.slope_v_per_mw * p)
}

pub fn snr_db(mean: f64, std: f64) -> f64 {
    if std == 0.0 {
        f64::INFINITY
    } else if mean <= 0.0 {
        f64::NEG_INFINITY
    } else {
        10.0 * (mean / std).log10()
    }
}

/// SNR of the model itself (noiseless mean over σ).
pub fn analytic_snr_db(avg_power_dbm: f64, d: &DetectorParams) -> f64 {
    snr_db(response_noiseless(avg_power_dbm, d), d.noise_sigma_v)
}

/// Solve `noise_sigma_v` so the analytic SNR best matches `anchors` (least
/// squares in dB). Only the slope/noise ratio is observable, so the slope in
/// `base` is kept.
pub fn calibrate_noise(base: &DetectorParams, anchors: &[(f64, f64)]) -> DetectorParams {
    let log_sigma = anchors
        .iter()
        .map(|&(p, snr)| response_noiseless(p, base).log10() - snr / 10.0)
        .sum::<f64>()
        / anchors.len() as f64;
    DetectorParams {
        noise_sigma_v: 10f64.powf(log_sigma),
        ..*base
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrPoint {
    pub power_dbm: f64,
    pub v_peak_mean: f64,
    pub v_peak_std: f64,
    pub snr_db: f64,
}

/// Monte-Carlo SNR at each power from `n_repeats` noisy readings.
pub fn snr_curve(d: &DetectorParams, powers_dbm: &[f64], n_repeats: usize, seed: Seed) -> Result<Vec<SnrPoint>> {
    d.validate()?;
    if n_repeats < 100 {
        return Err(Error::InvalidSpec(format!("snr_curve needs at least 100 repeats, got {n_repeats}")));
    }
    Ok(powers_dbm
        .iter()
        .enumerate()
        .map(|(i, &power_dbm)| {
            let mut rng = seed.rng(Op::DetectorSweep, i as u32);
            let v0 = response_noiseless(power_dbm, d);
            let reads: Vec<f64> = (0..n_repeats)
                .map(|_| v0 + d.noise_sigma_v * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let n = n_repeats as f64;
            let mean = reads.iter().sum::<f64>() / n;
            let var = reads.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            // Identical readings can leave a rounding-level spread in `var`.
            let std = if d.noise_sigma_v == 0.0 { 0.0 } else { var.sqrt() };
            SnrPoint {
                power_dbm,
                v_peak_mean: mean,
                v_peak_std: std,
                snr_db: snr_db(mean, std),
            }
        })
        .collect())
}

/// Default evaluation grid for the linear range: -60 dBm to +10 dBm in 0.01 dB steps.
pub fn default_power_grid() -> Vec<f64> {
    (0..=7000).map(|i| -60.0 + i as f64 * 0.01).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearRange {
    pub lower_dbm: Option<f64>,
    pub upper_dbm: Option<f64>,
    pub range_db: f64,
    pub diagnostic: Option<String>,
}

pub fn linear_range_db(d: &DetectorParams, linearity_tol: f64, snr_floor_db: f64) -> Result<LinearRange> {
    linear_range_on(d, linearity_tol, snr_floor_db, &default_power_grid())
}

/// Span between the quietest power meeting `snr_floor_db` and the loudest
/// power whose noiseless response is within `linearity_tol` of linear.
pub fn linear_range_on(d: &DetectorParams, linearity_tol: f64, snr_floor_db: f64, grid_dbm: &[f64]) -> Result<LinearRange> {
    d.validate()?;
    if !(linearity_tol > 0.0 && linearity_tol < 1.0) {
        return Err(Error::InvalidSpec(format!("linearity tolerance must be in (0, 1), got {linearity_tol}")));
    }
    let upper = grid_dbm
        .iter()
        .copied()
        .filter(|&p| linearity_deviation(p, d) <= linearity_tol)
        .reduce(f64::max);
    let lower = grid_dbm
        .iter()
        .copied()
        .filter(|&p| analytic_snr_db(p, d) >= snr_floor_db)
        .reduce(f64::min);
    let (range_db, diagnostic) = match (lower, upper) {
        (Some(lo), Some(hi)) if lo <= hi => (hi - lo, None),
        (Some(lo), Some(hi)) => (0.0, Some(format!("noise floor {lo} dBm lies above linearity limit {hi} dBm"))),
        (None, _) => (0.0, Some(format!("no grid power reaches SNR {snr_floor_db} dB"))),
        (_, None) => (0.0, Some(format!("no grid power is linear within {linearity_tol}"))),
    };
    Ok(LinearRange {
        lower_dbm: lower,
        upper_dbm: upper,
        range_db,
        diagnostic,
    })
}

/// How sample amplitudes drive the detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveOptions {
    /// Intensity modulation depth: `P = P_op · (1 + depth · v)` for `v ∈ [−1, 1]`.
    pub modulation_depth: f64,
    /// Undo the compression with the inverse of the calibrated response.
    pub inverse_correction: bool,
}

impl Default for DriveOptions {
    fn default() -> Self {
        Self {
            modulation_depth: 0.5,
            inverse_correction: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorOutput {
    pub stream: SampleStream,
    /// Inputs outside [−1, 1] that were clipped.
    pub clipped: usize,
}

/// Route normalized sample values through the detector at an operating power.
///
/// Output is the AC-coupled peak voltage `V(P_op(1 + m·v)) − V(P_op)` plus
/// noise; with inverse correction the reading is mapped back to power and
/// re-expressed on the linear slope. Noise for sample `k` depends only on
/// `(seed, channel, k)`.
pub fn apply_detector(
    s: &SampleStream,
    input_avg_power_dbm: f64,
    d: &DetectorParams,
    opts: &DriveOptions,
    seed: Seed,
    channel: u32,
) -> Result<DetectorOutput> {
    d.validate()?;
    if !(opts.modulation_depth > 0.0 && opts.modulation_depth <= 1.0) {
        return Err(Error::InvalidSpec(format!("modulation depth must be in (0, 1], got {}", opts.modulation_depth)));
    }
    let p_op = dbm_to_mw(input_avg_power_dbm);
    let v_op = response_mw(p_op, d);
    let mut rng = seed.rng(Op::DetectorResponse, channel + 1);
    let mut clipped = 0;
    let values = s
        .values
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let v = if v.abs() > 1.0 {
                clipped += 1;
                v.clamp(-1.0, 1.0)
            } else {
                v
            };
            let p = p_op * (1.0 + opts.modulation_depth * v);
            let noise = if d.noise_sigma_v > 0.0 {
                d.noise_sigma_v * normal_at(&mut rng, k as u64)
            } else {
                0.0
            };
            let reading = response_mw(p, d) + noise;
            if opts.inverse_correction {
                d.slope_v_per_mw * (invert_response_mw(reading, d) - p_op)
            } else {
                reading - v_op
            }
        })
        .collect();
    Ok(DetectorOutput {
        stream: SampleStream {
            times: s.times.clone(),
            values,
        },
        clipped,
    })
}
