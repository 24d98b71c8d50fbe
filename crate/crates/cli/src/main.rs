use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use pulsebss::export::write_waveforms;
use pulsebss::harness::{generate, run_detector_sweep, run_scenario, run_trials, ScenarioConfig};
use pulsebss::rng::Seed;
use pulsebss::{Error, Result};

/// Pulse-sampled two-channel blind source separation simulator.
#[derive(Debug, Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario and write CSV artifacts plus report.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run N seeded trials and report the spread of φ0.
    Trials {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep the detector model over input power.
    DetectorCurve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write source and mixture waveforms as CSV (stdout unless --out is given).
    Gen {
        #[arg(long)]
        config: PathBuf,
        /// Directory for waveforms.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn execute(cmd: Command) -> Result<()> {
    let started = Instant::now();
    match cmd {
        Command::Run { config, out, seed } => {
            let mut cfg = ScenarioConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let r = run_scenario(&cfg, &out)?;
            let ber = r.trial.ber.map_or("n/a".to_string(), |b| format!("{b:e}"));
            println!(
                "{}: ber {ber}, theta0 {:.3} deg, phi0 {:.3} deg, leakage {:.1} dB, soi channel {}",
                cfg.name, r.trial.theta0_deg, r.trial.phi0_deg, r.trial.leakage_db, r.trial.soi_channel
            );
            for w in &r.warnings {
                eprintln!("warning: {w}");
            }
        }
        Command::Trials { config, n, out } => {
            let cfg = ScenarioConfig::load(&config)?;
            let r = run_trials(&cfg, n, &out)?;
            println!(
                "{}: {} of {} trials ok, phi0 spread {:.2} deg (mod 90)",
                cfg.name,
                r.trials.len(),
                r.n_requested,
                r.phi0_spread_deg
            );
            for f in &r.failures {
                eprintln!("trial {} (seed {}) failed: {}", f.index, f.seed, f.error);
            }
        }
        Command::DetectorCurve { config, out } => {
            let cfg = ScenarioConfig::load(&config)?;
            let r = run_detector_sweep(&cfg, &out)?;
            println!(
                "saturation {:.2} dBm, linear range {:.1} dB, noise sigma {:.4e} V",
                r.saturation_dbm, r.linear_range.range_db, r.noise_sigma_v
            );
            if let Some(d) = &r.linear_range.diagnostic {
                eprintln!("warning: {d}");
            }
        }
        Command::Gen { config, out } => {
            let cfg = ScenarioConfig::load(&config)?;
            let waves = generate(&cfg, Seed(cfg.seed))?;
            let refs: Vec<_> = waves.iter().collect();
            match out {
                Some(dir) => {
                    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
                    pulsebss::export::export_waveforms(&refs, &dir.join("waveforms.csv"))?;
                }
                None => {
                    let stdout = std::io::stdout().lock();
                    let mut buf = std::io::BufWriter::new(stdout);
                    write_waveforms(&refs, &mut buf)?;
                    buf.flush().map_err(|e| Error::io("<stdout>", e))?;
                }
            }
        }
    }
    eprintln!("elapsed {:.2} s", started.elapsed().as_secs_f64());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
