use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bss::{AngleSet, BssSettings, DetectorStage, FourthFitMethod};
use crate::detector::{calibrate_noise, DetectorParams, DriveOptions, REFERENCE_SLOPE_V_PER_MW, SNR_ANCHORS};
use crate::error::{Error, Result};
use crate::mixer::MixingMatrix;
use crate::sampler::PulseTrain;
use crate::signalgen::{InterferenceSpec, SoiSpec};

/// A complete scenario, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub seed: u64,
    pub soi: SoiSpec,
    pub interference: InterferenceSpec,
    pub mixing: MixingMatrix,
    pub sampler: PulseTrain,
    #[serde(default)]
    pub detector: DetectorConfig,
    #[serde(default)]
    pub bss: BssSettings,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    /// Route the pulse samples through the detector before the moments.
    pub enabled: bool,
    pub p_scw_dbm: f64,
    pub t_fwhm_s: f64,
    pub pulse_period_s: f64,
    pub slope_v_per_mw: f64,
    /// Omitted: calibrated against the reference SNR anchors.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_sigma_v: Option<f64>,
    pub inverse_correction: bool,
    pub operating_power_dbm: f64,
    pub modulation_depth: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        let r = DetectorParams::reference();
        let drive = DriveOptions::default();
        Self {
            enabled: false,
            p_scw_dbm: r.p_scw_dbm,
            t_fwhm_s: r.t_fwhm_s,
            pulse_period_s: r.pulse_period_s,
            slope_v_per_mw: REFERENCE_SLOPE_V_PER_MW,
            noise_sigma_v: None,
            inverse_correction: drive.inverse_correction,
            operating_power_dbm: -20.0,
            modulation_depth: drive.modulation_depth,
        }
    }
}

impl DetectorConfig {
    pub fn params(&self) -> DetectorParams {
        let base = DetectorParams {
            p_scw_dbm: self.p_scw_dbm,
            t_fwhm_s: self.t_fwhm_s,
            pulse_period_s: self.pulse_period_s,
            slope_v_per_mw: self.slope_v_per_mw,
            noise_sigma_v: self.noise_sigma_v.unwrap_or(1.0),
        };
        match self.noise_sigma_v {
            Some(_) => base,
            None => calibrate_noise(&base, &SNR_ANCHORS),
        }
    }

    /// The detector stage for the separation, if enabled.
    pub fn stage(&self) -> Option<DetectorStage> {
        self.enabled.then(|| DetectorStage {
            params: self.params(),
            operating_power_dbm: self.operating_power_dbm,
            drive: DriveOptions {
                modulation_depth: self.modulation_depth,
                inverse_correction: self.inverse_correction,
            },
        })
    }
}

/// Which artifacts a run writes besides `report.json`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    pub scatter: bool,
    pub moment_curves: bool,
    pub eye: bool,
    /// Full-rate source, mixture and output waveforms (large).
    pub waveforms: bool,
}

impl Default for Outputs {
    fn default() -> Self {
        Self {
            scatter: true,
            moment_curves: true,
            eye: true,
            waveforms: false,
        }
    }
}

/// Power grid and criteria for `detector-curve`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub start_dbm: f64,
    pub stop_dbm: f64,
    pub step_db: f64,
    pub repeats: usize,
    pub linearity_tol: f64,
    pub snr_floor_db: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            start_dbm: -50.0,
            stop_dbm: 0.0,
            step_db: 1.0,
            repeats: 1000,
            linearity_tol: 0.1,
            snr_floor_db: 1.0,
        }
    }
}

impl SweepConfig {
    pub fn grid(&self) -> Vec<f64> {
        let n = ((self.stop_dbm - self.start_dbm) / self.step_db + 1e-9).floor() as usize;
        (0..=n).map(|k| self.start_dbm + k as f64 * self.step_db).collect()
    }

    fn validate(&self) -> Result<()> {
        if !(self.step_db > 0.0 && self.stop_dbm >= self.start_dbm && self.start_dbm.is_finite() && self.stop_dbm.is_finite()) {
            return Err(Error::Config(format!("sweep: bad power grid {self:?}")));
        }
        if self.repeats < 100 {
            return Err(Error::Config(format!("sweep: repeats must be >= 100, got {}", self.repeats)));
        }
        if !(self.linearity_tol > 0.0 && self.linearity_tol < 1.0) {
            return Err(Error::Config(format!("sweep: linearity_tol must be in (0, 1), got {}", self.linearity_tol)));
        }
        Ok(())
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario config serializes to TOML")
    }

    pub fn validate(&self) -> Result<()> {
        self.soi.validate()?;
        let dt = self.soi.dt();
        self.interference.validate(dt)?;
        self.mixing.validate()?;
        self.sampler.validate()?;
        if self.sampler.period_s < dt {
            return Err(Error::Oversampling {
                period_s: self.sampler.period_s,
                dt,
            });
        }
        if self.detector.enabled {
            self.detector.params().validate()?;
            if !(self.detector.modulation_depth > 0.0 && self.detector.modulation_depth <= 1.0) {
                return Err(Error::Config(format!(
                    "detector: modulation_depth must be in (0, 1], got {}",
                    self.detector.modulation_depth
                )));
            }
        }
        let count = |a: &AngleSet| match a {
            AngleSet::Uniform(n) | AngleSet::Random(n) => *n,
            AngleSet::Degrees(v) => v.len(),
        };
        if count(&self.bss.theta) < 3 {
            return Err(Error::Config("bss: at least 3 theta angles are needed".into()));
        }
        let min_phi = match self.bss.fourth_fit {
            FourthFitMethod::Basis5 => 5,
            FourthFitMethod::SharedPhase4 => 4,
        };
        if count(&self.bss.phi) < min_phi {
            return Err(Error::Config(format!("bss: {:?} needs at least {min_phi} phi angles", self.bss.fourth_fit)));
        }
        if let Some(s) = &self.sweep {
            s.validate()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "t"
seed = 3

[soi]
kind = "binary_nrz"
bit_rate = 2e8
n_bits = 100
samples_per_bit = 8
amplitude = 1.0

[interference]
bandwidth = 2e8
rms = 1.0

[mixing]
a11 = 1.0
a12 = 0.5
a21 = 0.5
a22 = 1.0

[sampler]
period_s = 2e-8
width_s = 5e-9
shape = "rect"
offset_s = 2.5e-9
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = ScenarioConfig::from_toml_str(MINIMAL).unwrap();
        assert!(!cfg.detector.enabled);
        assert_eq!(cfg.bss, BssSettings::default());
        assert_eq!(cfg.outputs, Outputs::default());
        assert!(cfg.sweep.is_none());
        assert_eq!(cfg.detector.params(), DetectorParams::reference());
    }

    #[test]
    fn round_trip_is_exact() {
        let mut cfg = ScenarioConfig::from_toml_str(MINIMAL).unwrap();
        cfg.sweep = Some(SweepConfig::default());
        cfg.detector.noise_sigma_v = Some(0.0123);
        cfg.bss.theta = AngleSet::Degrees(vec![0.0, 60.0, 120.0]);
        let back = ScenarioConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<ScenarioConfig>(&json).unwrap(), cfg);
    }

    #[test]
    fn invalid_configs_exit_with_code_two() {
        let cases = [
            MINIMAL.replace("bit_rate = 2e8", "bit_rate = -1.0"),
            MINIMAL.replace("a11 = 1.0", "a11 = nan"),
            MINIMAL.replace("period_s = 2e-8", "period_s = 1e-10"),
            MINIMAL.replace("seed = 3", "seed = 3\nbogus = 1"),
            format!("{MINIMAL}\n[bss]\nn_theta = 2\nn_phi = 8\n"),
            format!("{MINIMAL}\n[bss]\nn_theta = 3\nn_phi = 4\n"),
        ];
        for text in cases {
            let err = ScenarioConfig::from_toml_str(&text).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{err}");
        }
    }

    #[test]
    fn sweep_grid_includes_both_ends() {
        let g = SweepConfig {
            start_dbm: -45.0,
            stop_dbm: 0.0,
            step_db: 0.5,
            ..SweepConfig::default()
        }
        .grid();
        assert_eq!(g.len(), 91);
        assert_eq!(g[0], -45.0);
        assert_eq!(*g.last().unwrap(), 0.0);
    }
}
