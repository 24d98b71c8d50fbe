//! Optical pulse sampling.
//!
//! Each pulse gates the waveform over its aperture; the recorded value is the
//! pulse-weighted average of the signal under the pulse, taken at the pulse
//! centre. The slow detector/ADC chain after the modulator is folded into this
//! average, so the pulse width is the only sampling timescale.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{SampleStream, Waveform};

// Relative slack when snapping window edges onto the sample grid.
const GRID_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseShape {
    /// Uniform weight over `[t - width/2, t + width/2)`.
    Rect,
    /// Gaussian with FWHM equal to the width, truncated at ±2 widths.
    GaussianFwhm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseTrain {
    pub period_s: f64,
    pub width_s: f64,
    pub shape: PulseShape,
    /// Centre of the first pulse.
    pub offset_s: f64,
}

impl PulseTrain {
    pub fn validate(&self) -> Result<()> {
        if !(self.period_s > 0.0 && self.period_s.is_finite()) {
            return Err(Error::InvalidSpec(format!("pulse period must be positive, got {}", self.period_s)));
        }
        if !(self.width_s > 0.0 && self.width_s <= self.period_s) {
            return Err(Error::InvalidSpec(format!(
                "pulse width {:e} s must lie in (0, period {:e} s]",
                self.width_s, self.period_s
            )));
        }
        if !(self.offset_s >= 0.0 && self.offset_s < self.period_s) {
            return Err(Error::InvalidSpec(format!(
                "pulse offset {:e} s must lie in [0, period)",
                self.offset_s
            )));
        }
        Ok(())
    }

    /// Half-extent of the pulse support around its centre.
    fn support_half_width(&self) -> f64 {
        match self.shape {
            PulseShape::Rect => 0.5 * self.width_s,
            PulseShape::GaussianFwhm => 2.0 * self.width_s,
        }
    }
}

pub fn duty_cycle(p: &PulseTrain) -> f64 {
    p.width_s / p.period_s
}

/// Pulse-sample `x` with the train `p`.
///
/// Pulses narrower than one grid step degrade to nearest-sample picking.
/// Pulses whose support runs past either end of the waveform are dropped.
pub fn sample(x: &Waveform, p: &PulseTrain) -> Result<SampleStream> {
    p.validate()?;
    let dt = x.dt();
    if p.period_s < dt {
        return Err(Error::Oversampling {
            period_s: p.period_s,
            dt,
        });
    }
    let data = x.samples();
    let len = data.len();
    let point = p.width_s <= dt;
    let half = if point { 0.0 } else { p.support_half_width() };

    let mut times = Vec::new();
    let mut values = Vec::new();
    for k in 0.. {
        let t = p.offset_s + k as f64 * p.period_s;
        // Grid units from here on.
        let (a, b) = ((t - half) / dt, (t + half) / dt);
        if a > len as f64 {
            break;
        }
        if a < -GRID_EPS || b > len as f64 + GRID_EPS {
            continue;
        }
        let value = if point {
            let j = (t / dt).round() as usize;
            if j >= len {
                continue;
            }
            data[j]
        } else {
            match p.shape {
                PulseShape::Rect => {
                    let lo = (a - GRID_EPS).ceil().max(0.0) as usize;
                    let hi = ((b - GRID_EPS).ceil() as usize).min(len);
                    let window = &data[lo..hi];
                    window.iter().sum::<f64>() / window.len() as f64
                }
                PulseShape::GaussianFwhm => {
                    let lo = (a - GRID_EPS).ceil().max(0.0) as usize;
                    let hi = ((b + GRID_EPS).floor() as usize).min(len - 1);
                    let k2 = 4.0 * std::f64::consts::LN_2 / (p.width_s * p.width_s);
                    let (mut num, mut den) = (0.0, 0.0);
                    for (j, &v) in data.iter().enumerate().take(hi + 1).skip(lo) {
                        let d = j as f64 * dt - t;
                        let w = (-k2 * d * d).exp();
                        num += w * v;
                        den += w;
                    }
                    num / den
                }
            }
        };
        times.push(t);
        values.push(value);
    }
    SampleStream::new(times, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect(period_s: f64, width_s: f64, offset_s: f64) -> PulseTrain {
        PulseTrain {
            period_s,
            width_s,
            shape: PulseShape::Rect,
            offset_s,
        }
    }

    #[test]
    fn duty_cycle_examples() {
        assert!((duty_cycle(&rect(1e-6, 5e-9, 0.0)) - 0.005).abs() < 1e-15);
        assert_eq!(duty_cycle(&rect(1e-6, 1e-6, 0.0)), 1.0);
        let mode_locked = duty_cycle(&rect(1.0 / 37e6, 70e-15, 0.0));
        assert!((mode_locked - 2.59e-6).abs() < 0.01e-6);
        assert!((1e-8..=1e-4).contains(&mode_locked));
    }

    #[test]
    fn narrow_pulse_picks_nearest_sample() {
        let x = Waveform::new(1.0, (0..100).map(|k| (k * k) as f64).collect(), "x").unwrap();
        let s = sample(&x, &rect(7.0, 0.5, 3.2)).unwrap();
        for (t, v) in s.times.iter().zip(&s.values) {
            assert_eq!(*v, x.samples()[t.round() as usize]);
        }
        assert_eq!(s.len(), 14);
    }

    #[test]
    fn rect_over_one_sine_period_is_near_zero() {
        let dt = 1e-3;
        let f = 10.0; // 100 samples per period
        let x = Waveform::new(dt, (0..10_000).map(|k| (std::f64::consts::TAU * f * k as f64 * dt).sin()).collect(), "x").unwrap();
        let p = rect(0.5, 0.1, 0.1234);
        let s = sample(&x, &p).unwrap();
        assert!(!s.is_empty());
        let bound = 2.0 / (p.width_s / dt);
        for v in &s.values {
            assert!(v.abs() < bound, "{v}");
        }
    }

    #[test]
    fn oversampling_is_rejected() {
        let x = Waveform::new(1.0, vec![0.0; 10], "x").unwrap();
        let err = sample(&x, &rect(0.5, 0.25, 0.0)).unwrap_err();
        assert!(matches!(err, Error::Oversampling { .. }));
    }

    #[test]
    fn invalid_trains_are_rejected() {
        assert!(rect(1.0, 2.0, 0.0).validate().is_err());
        assert!(rect(1.0, 0.0, 0.0).validate().is_err());
        assert!(rect(1.0, 0.5, 1.0).validate().is_err());
        assert!(rect(1.0, 0.5, -0.1).validate().is_err());
    }

    #[test]
    fn pulses_running_off_the_ends_are_dropped() {
        let x = Waveform::new(1.0, vec![1.0; 100], "x").unwrap();
        // First pulse centred at 0 has support [-2.5, 2.5) and must go.
        let s = sample(&x, &rect(10.0, 5.0, 0.0)).unwrap();
        assert_eq!(s.times.first(), Some(&10.0));
        assert!(s.times.iter().all(|t| t + 2.5 <= 100.0));
    }

    #[test]
    fn gaussian_support_is_two_widths() {
        let x = Waveform::new(1.0, vec![1.0; 100], "x").unwrap();
        let p = PulseTrain {
            period_s: 10.0,
            width_s: 4.0,
            shape: PulseShape::GaussianFwhm,
            offset_s: 5.0,
        };
        let s = sample(&x, &p).unwrap();
        assert_eq!(s.times, vec![15.0, 25.0, 35.0, 45.0, 55.0, 65.0, 75.0, 85.0]);
    }
}
