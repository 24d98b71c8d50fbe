use serde::{Deserialize, Serialize};

use super::fit::{FourthMomentFit, SecondMomentFit};
use crate::error::{Error, Result};
use crate::mat2::Mat2;
use crate::signal::Waveform;

/// `U(θ0)·diag(1, √((q1+q2)/(q1−q2)))·U(θ0)ᵀ`.
///
/// Stretches the minor principal axis up to the major one, so whitened
/// streams have covariance `(q1 + q2)·I`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Whitener {
    pub matrix: Mat2,
    pub u_theta0: f64,
    pub sigma_ratio: f64,
}

pub fn pca_whitener(f: &SecondMomentFit) -> Result<Whitener> {
    if f.q1 <= f.q2.abs() || !f.q1.is_finite() {
        return Err(Error::DegenerateFit(format!(
            "second principal power q1 − |q2| = {:e} is not positive",
            f.q1 - f.q2.abs()
        )));
    }
    let sigma_ratio = ((f.q1 + f.q2) / (f.q1 - f.q2)).sqrt();
    let u = Mat2::rotation(f.theta0);
    let matrix = u.mul(&Mat2::diag(1.0, sigma_ratio)).mul(&u.transpose());
    Ok(Whitener {
        matrix,
        u_theta0: f.theta0,
        sigma_ratio,
    })
}

/// `[[cos φ0, −sin φ0], [sin φ0, cos φ0]]`.
pub fn ica_rotation(f: &FourthMomentFit) -> Mat2 {
    Mat2::rotation(f.phi0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Demixer {
    pub matrix: Mat2,
    /// 1 or 2: the output whose kurtosis lies farthest below 3.
    pub soi_channel: u8,
    pub soi_kurtosis: f64,
    pub other_kurtosis: f64,
    /// Both outputs are about equally far from Gaussian.
    pub ambiguous: bool,
}

/// `matrix = v · w.matrix`, with the SOI picked as the more sub-Gaussian output.
pub fn compose_demixer(w: &Whitener, v: &Mat2, y1_kurt: f64, y2_kurt: f64, ambiguity_tol: f64) -> Result<Demixer> {
    let matrix = v.mul(&w.matrix);
    if !matrix.is_finite() || matrix.det() == 0.0 {
        return Err(Error::DegenerateFit("composed demixer is singular or non-finite".into()));
    }
    let (soi_channel, soi_kurtosis, other_kurtosis) = if y2_kurt < y1_kurt {
        (2, y2_kurt, y1_kurt)
    } else {
        (1, y1_kurt, y2_kurt)
    };
    let ambiguous = ((y1_kurt - 3.0).abs() - (y2_kurt - 3.0).abs()).abs() < ambiguity_tol;
    Ok(Demixer {
        matrix,
        soi_channel,
        soi_kurtosis,
        other_kurtosis,
        ambiguous,
    })
}

impl Demixer {
    pub fn identity() -> Self {
        Demixer {
            matrix: Mat2::IDENTITY,
            soi_channel: 1,
            soi_kurtosis: f64::NAN,
            other_kurtosis: f64::NAN,
            ambiguous: true,
        }
    }
}

/// Apply the 2×2 demixer to full-rate mixtures; returns `(y1, y2)`.
pub fn apply_demix(d: &Demixer, x1: &Waveform, x2: &Waveform) -> Result<(Waveform, Waveform)> {
    x1.same_grid(x2)?;
    let n = x1.len();
    let (mut y1, mut y2) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for (&a, &b) in x1.samples().iter().zip(x2.samples()) {
        let (u, v) = d.matrix.apply(a, b);
        y1.push(u);
        y2.push(v);
    }
    Ok((x1.with_samples(y1, "y1"), x1.with_samples(y2, "y2")))
}
