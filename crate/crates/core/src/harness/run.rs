use std::path::Path;

use rayon::prelude::*;

use super::config::ScenarioConfig;
use super::report::{
    write_json, AnchorCheck, Artifacts, DetectorReport, RunReport, TrialFailure, TrialsReport, VERSION,
};
use crate::bss::{apply_demix, separate, Separation, COMPOSITION_NOTE};
use crate::detector::{
    analytic_snr_db, linear_range_db, saturation_avg_power_dbm, snr_curve, SnrPoint, SNR_ANCHORS,
};
use crate::error::{Error, Result, StageExt};
use crate::export;
use crate::metrics::{align, ber, eye_data, leakage_db, phi0_spread, residual_snr_db, EyeDiagram, TrialReport};
use crate::mixer::{mix, DEFAULT_NEAR_SINGULAR_DET};
use crate::rng::Seed;
use crate::signal::Waveform;
use crate::signalgen::{gen_interference, gen_soi, soi_symbols, SoiKind};

/// Upper bound on concurrent trials; each holds several full-rate waveforms.
const MAX_TRIAL_THREADS: usize = 4;

/// Sources and mixtures for a scenario: `[s_soi, s_int, x1, x2]`.
pub fn generate(cfg: &ScenarioConfig, seed: Seed) -> Result<[Waveform; 4]> {
    let s_soi = gen_soi(&cfg.soi, seed).stage("signalgen")?;
    let s_int = gen_interference(&cfg.interference, s_soi.duration(), s_soi.dt(), seed).stage("signalgen")?;
    let (x1, x2) = mix(&s_soi, &s_int, &cfg.mixing).stage("mixer")?;
    Ok([s_soi, s_int, x1, x2])
}

/// One scenario evaluated in memory.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub trial: TrialReport,
    pub separation: Separation,
    pub eye: EyeDiagram,
    pub warnings: Vec<String>,
    /// `[s_soi, s_int, x1, x2, y1, y2]`, kept only on request.
    pub waveforms: Option<Vec<Waveform>>,
}

pub fn simulate(cfg: &ScenarioConfig, seed: Seed, keep_waveforms: bool) -> Result<Simulation> {
    let [s_soi, s_int, x1, x2] = generate(cfg, seed)?;
    let mut warnings = Vec::new();
    if cfg.mixing.is_near_singular(DEFAULT_NEAR_SINGULAR_DET) {
        warnings.push(format!("mixing matrix is near-singular (|det| = {:e})", cfg.mixing.abs_det()));
    }
    let stage = cfg.detector.stage();
    let separation = separate(&x1, &x2, &cfg.sampler, &cfg.bss, stage.as_ref(), seed)?;
    warnings.extend(separation.diagnostics.notes.iter().cloned());
    if let Some(c) = separation.diagnostics.detector_clipped.filter(|&c| c > 0) {
        warnings.push(format!("{c} detector inputs clipped to the [-1, 1] envelope"));
    }

    let (y1, y2) = apply_demix(&separation.demixer, &x1, &x2).stage("demix")?;
    let recovered = if separation.demixer.soi_channel == 1 { &y1 } else { &y2 };
    let aligned = align(recovered, &s_soi).stage("metrics")?;
    let bit_period = cfg.soi.bit_period();
    let ber_rate = match cfg.soi.kind {
        SoiKind::BinaryNrz => {
            let bits = soi_symbols(&cfg.soi, seed).stage("metrics")?;
            let r = ber(&aligned, &bits, bit_period).stage("metrics")?;
            if !r.commensurate {
                warnings.push("bit period is not a whole number of grid steps; decisions snapped to nearest samples".into());
            }
            Some(r.rate)
        }
        SoiKind::Qam16Real => None,
    };
    let eye = eye_data(&aligned, bit_period).stage("metrics")?;
    let d = &separation.diagnostics;
    let trial = TrialReport {
        seed: seed.0,
        phi0_deg: d.fourth.phi0.to_degrees(),
        theta0_deg: d.second.theta0.to_degrees(),
        ber: ber_rate,
        eye_opening: eye.opening,
        snr_db: residual_snr_db(&aligned, &s_soi).stage("metrics")?,
        whiteness_residual: d.whiteness_residual,
        soi_channel: separation.demixer.soi_channel,
        soi_kurtosis: separation.demixer.soi_kurtosis,
        other_kurtosis: separation.demixer.other_kurtosis,
        leakage_db: leakage_db(&separation.demixer.matrix.mul(&cfg.mixing.as_mat2())),
    };
    let waveforms = keep_waveforms.then(|| vec![s_soi, s_int, x1, x2, y1, y2]);
    Ok(Simulation {
        trial,
        separation,
        eye,
        warnings,
        waveforms,
    })
}

fn create_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))
}

/// Run the scenario at `cfg.seed` and write its artifacts into `out`.
///
/// On failure, files already written by this run are removed.
pub fn run_scenario(cfg: &ScenarioConfig, out: &Path) -> Result<RunReport> {
    cfg.validate()?;
    create_dir(out)?;
    let sim = simulate(cfg, Seed(cfg.seed), cfg.outputs.waveforms)?;
    let report = RunReport {
        version: VERSION.to_string(),
        config: cfg.clone(),
        trial: sim.trial.clone(),
        demixer: sim.separation.demixer,
        diagnostics: sim.separation.diagnostics.clone(),
        warnings: sim.warnings.clone(),
    };

    let mut files = Artifacts::default();
    let d = &sim.separation.diagnostics;
    files.write(out.join("config.toml"), |p| {
        std::fs::write(p, cfg.to_toml_string()).map_err(|e| Error::io(p, e))
    })?;
    if cfg.outputs.scatter {
        let (s1, s2) = &sim.separation.samples;
        files.write(out.join("scatter.csv"), |p| export::export_scatter(s1, s2, p))?;
    }
    if cfg.outputs.moment_curves {
        let (second, fourth) = (d.second, d.fourth);
        files.write(out.join("moments_theta.csv"), |p| {
            export::export_moment_curve(&d.theta_measurements, |t| second.eval(t), p)
        })?;
        files.write(out.join("moments_phi.csv"), |p| {
            export::export_moment_curve(&d.phi_measurements, |t| fourth.eval(t), p)
        })?;
    }
    if cfg.outputs.eye {
        files.write(out.join("eye.csv"), |p| export::export_eye(&sim.eye, p))?;
    }
    if let Some(waves) = &sim.waveforms {
        let refs: Vec<&Waveform> = waves.iter().collect();
        files.write(out.join("waveforms.csv"), |p| export::export_waveforms(&refs, p))?;
    }
    files.write(out.join("summary.csv"), |p| {
        export::export_trials(std::slice::from_ref(&report.trial), p)
    })?;
    files.write(out.join("report.json"), |p| write_json(&report, p))?;
    files.commit();
    Ok(report)
}

/// Evaluate `n` trials with seeds derived from `cfg.seed`; failed trials are
/// recorded and the batch continues. Results do not depend on thread count.
pub fn run_trials_in_memory(cfg: &ScenarioConfig, n: usize) -> Result<TrialsReport> {
    cfg.validate()?;
    if n < 2 {
        return Err(Error::Config(format!("trials: need n >= 2, got {n}")));
    }
    let threads = std::thread::available_parallelism().map_or(1, |p| p.get()).min(MAX_TRIAL_THREADS);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::IllPosed(format!("thread pool: {e}")))?;
    let base = Seed(cfg.seed);
    let results: Vec<(usize, Seed, Result<Simulation>)> = pool.install(|| {
        (0..n)
            .into_par_iter()
            .map(|i| {
                let seed = base.for_trial(i as u64);
                (i, seed, simulate(cfg, seed, false))
            })
            .collect()
    });

    let mut trials = Vec::new();
    let mut failures = Vec::new();
    let mut warnings = Vec::new();
    for (index, seed, r) in results {
        match r {
            Ok(sim) => {
                warnings.extend(
                    sim.warnings
                        .into_iter()
                        .filter(|w| w != COMPOSITION_NOTE)
                        .map(|w| format!("trial {index}: {w}")),
                );
                trials.push(sim.trial);
            }
            Err(e) => failures.push(TrialFailure {
                index,
                seed: seed.0,
                error: e.to_string(),
            }),
        }
    }
    if trials.is_empty() {
        return Err(Error::IllPosed(format!("all {n} trials failed; first: {}", failures[0].error)));
    }
    let phis: Vec<f64> = trials.iter().map(|t| t.phi0_deg).collect();
    Ok(TrialsReport {
        version: VERSION.to_string(),
        config: cfg.clone(),
        n_requested: n,
        trials,
        failures,
        phi0_spread_deg: phi0_spread(&phis),
        warnings,
    })
}

/// [`run_trials_in_memory`] plus `trials.csv`, `config.toml` and `report.json` in `out`.
pub fn run_trials(cfg: &ScenarioConfig, n: usize, out: &Path) -> Result<TrialsReport> {
    create_dir(out)?;
    let report = run_trials_in_memory(cfg, n)?;
    let mut files = Artifacts::default();
    files.write(out.join("config.toml"), |p| {
        std::fs::write(p, cfg.to_toml_string()).map_err(|e| Error::io(p, e))
    })?;
    files.write(out.join("trials.csv"), |p| export::export_trials(&report.trials, p))?;
    files.write(out.join("report.json"), |p| write_json(&report, p))?;
    files.commit();
    Ok(report)
}

/// SNR and response sweep of the configured detector.
pub fn detector_sweep(cfg: &ScenarioConfig) -> Result<DetectorReport> {
    cfg.validate()?;
    let params = cfg.detector.params();
    params.validate()?;
    let sweep = cfg.sweep.unwrap_or_default();
    let seed = Seed(cfg.seed);
    let points = snr_curve(&params, &sweep.grid(), sweep.repeats, seed).stage("snr_curve")?;
    let anchor_powers: Vec<f64> = SNR_ANCHORS.iter().map(|a| a.0).collect();
    let measured: Vec<SnrPoint> = snr_curve(&params, &anchor_powers, sweep.repeats, seed.for_trial(1)).stage("snr_curve")?;
    let anchors = SNR_ANCHORS
        .iter()
        .zip(&measured)
        .map(|(&(power_dbm, target_snr_db), m)| AnchorCheck {
            power_dbm,
            target_snr_db,
            model_snr_db: analytic_snr_db(power_dbm, &params),
            measured_snr_db: m.snr_db,
        })
        .collect();
    Ok(DetectorReport {
        version: VERSION.to_string(),
        config: cfg.clone(),
        saturation_dbm: saturation_avg_power_dbm(&params),
        noise_sigma_v: params.noise_sigma_v,
        linear_range: linear_range_db(&params, sweep.linearity_tol, sweep.snr_floor_db).stage("linear_range")?,
        anchors,
        points,
    })
}

/// [`detector_sweep`] plus `detector_curve.csv`, `config.toml` and `report.json` in `out`.
pub fn run_detector_sweep(cfg: &ScenarioConfig, out: &Path) -> Result<DetectorReport> {
    create_dir(out)?;
    let report = detector_sweep(cfg)?;
    let mut files = Artifacts::default();
    files.write(out.join("config.toml"), |p| {
        std::fs::write(p, cfg.to_toml_string()).map_err(|e| Error::io(p, e))
    })?;
    files.write(out.join("detector_curve.csv"), |p| export::export_detector_curve(&report.points, p))?;
    files.write(out.join("report.json"), |p| write_json(&report, p))?;
    files.commit();
    Ok(report)
}
