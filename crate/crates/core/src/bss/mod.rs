//! Moment-curve blind source separation for two mixtures.
//!
//! Second moments of `cos θ·x1 + sin θ·x2` over a few angles give the
//! principal axes (whitening); fourth moments of the whitened pair over a few
//! angles give the rotation that aligns the independent components with the
//! outputs. Everything is closed-form from measured moments.

mod demix;
mod fit;
mod separate;

pub use demix::{apply_demix, compose_demixer, ica_rotation, pca_whitener, Demixer, Whitener};
pub use fit::{
    fit_fourth, fit_fourth_shared_phase, fit_fourth_with, fit_second, fit_second_with, FourthMomentFit,
    SecondMomentFit,
};
pub use separate::{
    resolve_angles, separate, AngleSet, BssSettings, DetectorStage, FourthFitMethod, MomentMeasurement,
    Separation, SeparationDiagnostics, Tolerances, COMPOSITION_NOTE,
};

use crate::error::{Error, Result};
use crate::signal::SampleStream;

/// `cos(angle)·x1 + sin(angle)·x2`, sample by sample.
pub fn weighted_mix(x1: &SampleStream, x2: &SampleStream, angle: f64) -> Result<SampleStream> {
    x1.same_times(x2)?;
    let (s, c) = angle.sin_cos();
    Ok(SampleStream {
        times: x1.times.clone(),
        values: x1.values.iter().zip(&x2.values).map(|(a, b)| c * a + s * b).collect(),
    })
}

/// Time average of the squared values.
pub fn second_moment(s: &SampleStream) -> Result<f64> {
    moment(&s.values, 2)
}

/// Time average of the fourth powers.
pub fn fourth_moment(s: &SampleStream) -> Result<f64> {
    moment(&s.values, 4)
}

/// Normalized fourth moment `E[x⁴] / E[x²]²` (3 for a Gaussian).
pub fn kurtosis(values: &[f64]) -> Result<f64> {
    let m2 = moment(values, 2)?;
    let m4 = moment(values, 4)?;
    Ok(m4 / (m2 * m2))
}

pub(crate) fn moment(values: &[f64], order: i32) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput("sample stream"));
    }
    Ok(values.iter().map(|v| v.powi(order)).sum::<f64>() / values.len() as f64)
}
