//! Scenario configuration, runners and reports.

mod config;
mod report;
mod run;

pub use config::{DetectorConfig, Outputs, ScenarioConfig, SweepConfig};
pub use report::{AnchorCheck, DetectorReport, RunReport, TrialFailure, TrialsReport, VERSION};
pub use run::{
    detector_sweep, generate, run_detector_sweep, run_scenario, run_trials, run_trials_in_memory, simulate,
    Simulation,
};
