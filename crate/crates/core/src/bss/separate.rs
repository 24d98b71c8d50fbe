use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::demix::{compose_demixer, ica_rotation, pca_whitener, Demixer};
use super::fit::{fit_fourth_shared_phase, fit_fourth_with, fit_second_with, FourthMomentFit, SecondMomentFit};
use super::{kurtosis, moment, weighted_mix};
use crate::detector::{apply_detector, DetectorParams, DriveOptions};
use crate::error::{Error, Result, StageExt};
use crate::mat2::Mat2;
use crate::rng::{Op, Seed};
use crate::sampler::{sample, PulseTrain};
use crate::signal::{SampleStream, Waveform};

/// Diagnostic attached to every separation.
pub const COMPOSITION_NOTE: &str = "demixer composed as Vt*U*S*Ut (rotation applied after whitening); \
the shorter V*U*inv(S) composition does not whiten the mixtures and is not used";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Largest accepted design-matrix condition number.
    pub max_condition: f64,
    /// Whitened off-diagonal / mean diagonal above this adds a note.
    pub whiteness: f64,
    /// Output kurtoses closer than this (in |k − 3|) flag the channel choice.
    pub kurtosis_ambiguity: f64,
    /// `q2/q1` at or below this is an isotropic mixture.
    pub isotropy: f64,
    /// 4th-harmonic amplitude over `p1` at or below this has no rotation.
    pub harmonic: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            max_condition: 1e8,
            whiteness: 0.02,
            kurtosis_ambiguity: 0.2,
            isotropy: 1e-9,
            harmonic: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AngleSet {
    /// `n` angles equally spaced over one period.
    Uniform(usize),
    /// `n` angles drawn uniformly over one period from the scenario seed.
    Random(usize),
    Degrees(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FourthFitMethod {
    /// Unconstrained harmonics 0, 2, 4 (needs ≥ 5 angles).
    #[default]
    Basis5,
    /// Shared-phase model (needs ≥ 4 angles).
    SharedPhase4,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBss", into = "RawBss")]
pub struct BssSettings {
    pub theta: AngleSet,
    pub phi: AngleSet,
    pub fourth_fit: FourthFitMethod,
    pub tolerances: Tolerances,
}

impl Default for BssSettings {
    fn default() -> Self {
        Self {
            theta: AngleSet::Uniform(6),
            phi: AngleSet::Uniform(8),
            fourth_fit: FourthFitMethod::Basis5,
            tolerances: Tolerances::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBss {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    theta_angles_deg: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n_theta: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    phi_angles_deg: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n_phi: Option<usize>,
    /// Draw `n_theta`/`n_phi` angles at random instead of equally spaced.
    #[serde(default)]
    random_angles: bool,
    #[serde(default)]
    fourth_fit: FourthFitMethod,
    #[serde(default)]
    tolerances: Tolerances,
}

fn angle_set(name: &str, explicit: Option<Vec<f64>>, count: Option<usize>, random: bool) -> Result<AngleSet> {
    match (explicit, count) {
        (Some(_), Some(_)) => Err(Error::Config(format!("bss: give either {name}_angles_deg or n_{name}, not both"))),
        (Some(v), None) => {
            if random {
                return Err(Error::Config(format!("bss: random_angles needs n_{name}, not an explicit list")));
            }
            Ok(AngleSet::Degrees(v))
        }
        (None, Some(n)) if random => Ok(AngleSet::Random(n)),
        (None, Some(n)) => Ok(AngleSet::Uniform(n)),
        (None, None) => Err(Error::Config(format!("bss: one of {name}_angles_deg or n_{name} is required"))),
    }
}

impl TryFrom<RawBss> for BssSettings {
    type Error = Error;

    fn try_from(r: RawBss) -> Result<Self> {
        Ok(BssSettings {
            theta: angle_set("theta", r.theta_angles_deg, r.n_theta, r.random_angles)?,
            phi: angle_set("phi", r.phi_angles_deg, r.n_phi, r.random_angles)?,
            fourth_fit: r.fourth_fit,
            tolerances: r.tolerances,
        })
    }
}

impl From<BssSettings> for RawBss {
    fn from(s: BssSettings) -> Self {
        let split = |a: AngleSet| match a {
            AngleSet::Uniform(n) => (None, Some(n), false),
            AngleSet::Random(n) => (None, Some(n), true),
            AngleSet::Degrees(v) => (Some(v), None, false),
        };
        let (theta_angles_deg, n_theta, rt) = split(s.theta);
        let (phi_angles_deg, n_phi, rp) = split(s.phi);
        RawBss {
            theta_angles_deg,
            n_theta,
            phi_angles_deg,
            n_phi,
            random_angles: rt || rp,
            fourth_fit: s.fourth_fit,
            tolerances: s.tolerances,
        }
    }
}

/// Angles in radians over one period of the moment curve (π for both curves).
///
/// Random sets use substream `trial` of the angle draws, so θ and φ sets are
/// independent.
pub fn resolve_angles(set: &AngleSet, seed: Seed, trial: u32) -> Vec<f64> {
    match set {
        AngleSet::Uniform(n) => (0..*n).map(|k| k as f64 * PI / *n as f64).collect(),
        AngleSet::Random(n) => {
            let mut rng = seed.rng(Op::Angles, trial);
            let mut v: Vec<f64> = (0..*n).map(|_| rng.random::<f64>() * PI).collect();
            v.sort_by(f64::total_cmp);
            v
        }
        AngleSet::Degrees(d) => d.iter().map(|a| a.to_radians()).collect(),
    }
}

/// Optical detector inserted between the sampler and the moment estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorStage {
    pub params: DetectorParams,
    /// Average optical power at the detector for an unmodulated pulse.
    pub operating_power_dbm: f64,
    pub drive: DriveOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentMeasurement {
    pub angle_deg: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationDiagnostics {
    pub second: SecondMomentFit,
    pub fourth: FourthMomentFit,
    pub theta_measurements: Vec<MomentMeasurement>,
    pub phi_measurements: Vec<MomentMeasurement>,
    /// |off-diagonal| / mean diagonal of the whitened sample covariance.
    pub whiteness_residual: f64,
    /// Mean diagonal of the whitened sample covariance.
    pub whitened_power: f64,
    /// Kurtosis of the rotated whitened samples, outputs 1 and 2.
    pub output_kurtosis: [f64; 2],
    pub n_samples: usize,
    pub detector_clipped: Option<usize>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Separation {
    pub demixer: Demixer,
    pub diagnostics: SeparationDiagnostics,
    /// The two sample streams the moments were measured on.
    pub samples: (SampleStream, SampleStream),
}

/// Learn a demixer from pulse-sampled mixtures.
pub fn separate(
    x1: &Waveform,
    x2: &Waveform,
    p: &PulseTrain,
    settings: &BssSettings,
    detector: Option<&DetectorStage>,
    seed: Seed,
) -> Result<Separation> {
    x1.same_grid(x2).stage("sample")?;
    let s1 = sample(x1, p).stage("sample")?;
    let s2 = sample(x2, p).stage("sample")?;
    if s1.is_empty() {
        return Err(Error::EmptyInput("no pulse fits inside the waveform")).stage("sample");
    }
    let mut clipped = None;
    let (s1, s2) = match detector {
        None => (s1, s2),
        Some(det) => {
            // Common full-scale so both channels drive the modulator alike.
            let peak = s1.values.iter().chain(&s2.values).fold(0.0f64, |m, v| m.max(v.abs()));
            let scale = if peak > 0.0 { 1.0 / peak } else { 1.0 };
            let d1 = apply_detector(&s1.map_values(|v| v * scale), det.operating_power_dbm, &det.params, &det.drive, seed, 0)
                .stage("detector")?;
            let d2 = apply_detector(&s2.map_values(|v| v * scale), det.operating_power_dbm, &det.params, &det.drive, seed, 1)
                .stage("detector")?;
            clipped = Some(d1.clipped + d2.clipped);
            (d1.stream, d2.stream)
        }
    };
    separate_samples(&s1, &s2, settings, seed, clipped)
}

/// Moment-curve separation on already-sampled mixtures.
pub(crate) fn separate_samples(
    s1: &SampleStream,
    s2: &SampleStream,
    settings: &BssSettings,
    seed: Seed,
    detector_clipped: Option<usize>,
) -> Result<Separation> {
    let tol = &settings.tolerances;
    s1.same_times(s2).stage("moments")?;
    let mut notes = vec![COMPOSITION_NOTE.to_string()];

    let thetas = resolve_angles(&settings.theta, seed, 0);
    let theta_m = measure(s1, s2, &thetas, 2).stage("theta moments")?;
    let second = fit_second_with(&thetas, &theta_m, tol).stage("fit_second")?;
    let whitener = pca_whitener(&second).stage("whiten")?;

    let (w1, w2) = apply_to_samples(&whitener.matrix, s1, s2);
    let c11 = moment(&w1.values, 2).stage("whiten")?;
    let c22 = moment(&w2.values, 2).stage("whiten")?;
    let c12 = w1.values.iter().zip(&w2.values).map(|(a, b)| a * b).sum::<f64>() / w1.len() as f64;
    let whitened_power = 0.5 * (c11 + c22);
    let whiteness_residual = c12.abs() / whitened_power;
    if whiteness_residual > tol.whiteness {
        notes.push(format!(
            "whitened covariance off-diagonal ratio {whiteness_residual:.4} exceeds {}",
            tol.whiteness
        ));
    }

    let phis = resolve_angles(&settings.phi, seed, 1);
    let phi_m = measure(&w1, &w2, &phis, 4).stage("phi moments")?;
    let fourth = match settings.fourth_fit {
        FourthFitMethod::Basis5 => fit_fourth_with(&phis, &phi_m, tol),
        FourthFitMethod::SharedPhase4 => fit_fourth_shared_phase(&phis, &phi_m, whitened_power, tol),
    }
    .stage("fit_fourth")?;

    // Output 1 is the whitened projection onto φ0, output 2 onto φ0 + 90°.
    let v = ica_rotation(&fourth).transpose();
    let (y1, y2) = apply_to_samples(&v, &w1, &w2);
    let k1 = kurtosis(&y1.values).stage("kurtosis")?;
    let k2 = kurtosis(&y2.values).stage("kurtosis")?;
    let demixer = compose_demixer(&whitener, &v, k1, k2, tol.kurtosis_ambiguity).stage("compose")?;
    if demixer.ambiguous {
        notes.push(format!("SOI channel choice is ambiguous: output kurtoses {k1:.3} and {k2:.3}"));
    }

    let deg = |angles: &[f64], values: Vec<f64>| {
        angles
            .iter()
            .zip(values)
            .map(|(a, v)| MomentMeasurement {
                angle_deg: a.to_degrees(),
                value: v,
            })
            .collect()
    };
    Ok(Separation {
        demixer,
        diagnostics: SeparationDiagnostics {
            second,
            fourth,
            theta_measurements: deg(&thetas, theta_m),
            phi_measurements: deg(&phis, phi_m),
            whiteness_residual,
            whitened_power,
            output_kurtosis: [k1, k2],
            n_samples: s1.len(),
            detector_clipped,
            notes,
        },
        samples: (s1.clone(), s2.clone()),
    })
}

fn measure(s1: &SampleStream, s2: &SampleStream, angles: &[f64], order: i32) -> Result<Vec<f64>> {
    angles
        .iter()
        .map(|&a| moment(&weighted_mix(s1, s2, a)?.values, order))
        .collect()
}

fn apply_to_samples(m: &Mat2, s1: &SampleStream, s2: &SampleStream) -> (SampleStream, SampleStream) {
    let (a, b): (Vec<f64>, Vec<f64>) = s1.values.iter().zip(&s2.values).map(|(x, y)| m.apply(*x, *y)).unzip();
    (
        SampleStream {
            times: s1.times.clone(),
            values: a,
        },
        SampleStream {
            times: s1.times.clone(),
            values: b,
        },
    )
}
