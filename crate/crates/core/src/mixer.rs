//! Instantaneous 2×2 mixing of the signal of interest and the interference.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat2::Mat2;
use crate::signal::Waveform;

/// Default |det| below which a scenario is flagged as near-singular.
pub const DEFAULT_NEAR_SINGULAR_DET: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixingMatrix {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
}

impl MixingMatrix {
    pub const IDENTITY: MixingMatrix = MixingMatrix {
        a11: 1.0,
        a12: 0.0,
        a21: 0.0,
        a22: 1.0,
    };

    pub fn new(a11: f64, a12: f64, a21: f64, a22: f64) -> Self {
        Self { a11, a12, a21, a22 }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.as_mat2().is_finite() {
            return Err(Error::InvalidMatrix(format!("non-finite entry in {self:?}")));
        }
        Ok(())
    }

    pub fn as_mat2(&self) -> Mat2 {
        Mat2([[self.a11, self.a12], [self.a21, self.a22]])
    }

    pub fn abs_det(&self) -> f64 {
        self.as_mat2().det().abs()
    }

    pub fn is_near_singular(&self, threshold: f64) -> bool {
        self.abs_det() < threshold
    }
}

/// `x1 = a11·s_soi + a12·s_int`, `x2 = a21·s_soi + a22·s_int`, sample by sample.
pub fn mix(s_soi: &Waveform, s_int: &Waveform, a: &MixingMatrix) -> Result<(Waveform, Waveform)> {
    a.validate()?;
    s_soi.same_grid(s_int)?;
    let (x1, x2): (Vec<f64>, Vec<f64>) = s_soi
        .samples()
        .iter()
        .zip(s_int.samples())
        .map(|(&s, &n)| (a.a11 * s + a.a12 * n, a.a21 * s + a.a22 * n))
        .unzip();
    Ok((s_soi.with_samples(x1, "x1"), s_soi.with_samples(x2, "x2")))
}
