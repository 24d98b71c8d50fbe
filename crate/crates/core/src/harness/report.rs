use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use crate::bss::{Demixer, SeparationDiagnostics};
use crate::detector::{LinearRange, SnrPoint};
use crate::error::{Error, Result};
use crate::metrics::TrialReport;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Everything needed to reproduce and audit one scenario run.
///
/// Wall-clock timing is deliberately absent so reports are byte-identical
/// across re-runs; the CLI prints it to stderr instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub version: String,
    pub config: ScenarioConfig,
    pub trial: TrialReport,
    pub demixer: Demixer,
    pub diagnostics: SeparationDiagnostics,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub index: usize,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialsReport {
    pub version: String,
    pub config: ScenarioConfig,
    pub n_requested: usize,
    pub trials: Vec<TrialReport>,
    pub failures: Vec<TrialFailure>,
    /// Smallest arc holding every φ0, modulo 90°.
    pub phi0_spread_deg: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorCheck {
    pub power_dbm: f64,
    pub target_snr_db: f64,
    /// Noiseless mean over σ.
    pub model_snr_db: f64,
    /// From the Monte-Carlo sweep at this power.
    pub measured_snr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorReport {
    pub version: String,
    pub config: ScenarioConfig,
    pub saturation_dbm: f64,
    pub noise_sigma_v: f64,
    pub linear_range: LinearRange,
    pub anchors: Vec<AnchorCheck>,
    pub points: Vec<SnrPoint>,
}

pub(crate) fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Files written so far by one run; removed again if the run fails.
#[derive(Debug, Default)]
pub(crate) struct Artifacts {
    written: Vec<PathBuf>,
    committed: bool,
}

impl Artifacts {
    pub(crate) fn write(&mut self, path: PathBuf, f: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
        // Register first so a half-written file is cleaned up too.
        self.written.push(path.clone());
        f(&path)
    }

    pub(crate) fn commit(mut self) -> Vec<PathBuf> {
        self.committed = true;
        std::mem::take(&mut self.written)
    }
}

impl Drop for Artifacts {
    fn drop(&mut self) {
        if !self.committed {
            for p in &self.written {
                let _ = std::fs::remove_file(p);
            }
        }
    }
}
