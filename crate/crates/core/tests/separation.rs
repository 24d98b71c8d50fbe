//! Moment-curve separation on simulated mixtures.

use std::f64::consts::PI;

use proptest::prelude::*;

use pulsebss::bss::{
    fit_fourth, fit_fourth_shared_phase, fit_second, separate, weighted_mix, BssSettings, Tolerances,
};
use pulsebss::harness::{generate, run_scenario, simulate, ScenarioConfig};
use pulsebss::rng::Seed;
use pulsebss::sampler::{sample, PulseShape, PulseTrain};
use pulsebss::signal::{SampleStream, Waveform};

fn configs_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

/// The two-source scenario scaled down for test runtime.
fn small_scenario() -> ScenarioConfig {
    let mut cfg = ScenarioConfig::load(&configs_dir().join("fig5_moments.toml")).unwrap();
    cfg.soi.n_bits = 40_000;
    cfg.soi.samples_per_bit = 8;
    cfg.sampler.period_s = 2e-8;
    cfg
}

fn full_rate(x: &Waveform) -> SampleStream {
    SampleStream::new((0..x.len()).map(|k| x.time(k)).collect(), x.samples().to_vec()).unwrap()
}

// z-score of the pulse-sampled k-th moment against the full-rate one.
fn moment_z(sampled: &SampleStream, full: &SampleStream, k: i32) -> f64 {
    let powers: Vec<f64> = sampled.values.iter().map(|v| v.powi(k)).collect();
    let n = powers.len() as f64;
    let mean = powers.iter().sum::<f64>() / n;
    let se = (powers.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
    let truth = full.values.iter().map(|v| v.powi(k)).sum::<f64>() / full.values.len() as f64;
    (mean - truth) / se
}

#[test]
fn pulse_moments_match_full_rate_moments() {
    let mut cfg = small_scenario();
    cfg.soi.n_bits = 100_000;
    let [s_soi, _, x1, x2] = generate(&cfg, Seed(11)).unwrap();
    let bit = cfg.soi.bit_period();
    let point = PulseTrain {
        period_s: 4.0 * bit,
        width_s: 0.5 * cfg.soi.dt(),
        shape: PulseShape::Rect,
        offset_s: 0.5 * bit,
    };
    let (p1, p2) = (sample(&x1, &point).unwrap(), sample(&x2, &point).unwrap());
    let (f1, f2) = (full_rate(&x1), full_rate(&x2));
    for deg in [0.0, 30.0, 75.0, 120.0, 165.0] {
        let a = f64::to_radians(deg);
        let sampled = weighted_mix(&p1, &p2, a).unwrap();
        let full = weighted_mix(&f1, &f2, a).unwrap();
        for k in [2, 4] {
            let z = moment_z(&sampled, &full, k);
            assert!(z.abs() <= 3.0, "moment {k} at {deg} deg: z = {z:.2}");
        }
    }

    // A one-bit aperture aligned to the bits sees the symbol exactly.
    let aligned = PulseTrain {
        width_s: bit,
        ..point
    };
    let s = sample(&s_soi, &aligned).unwrap();
    assert!(s.values.iter().all(|v| (v.abs() - 1.0).abs() < 1e-15));
}

#[test]
fn uniform_gain_scales_fits_and_keeps_angles() {
    let cfg = small_scenario();
    let [_, _, x1, x2] = generate(&cfg, Seed(3)).unwrap();
    let base = separate(&x1, &x2, &cfg.sampler, &cfg.bss, None, Seed(3)).unwrap();
    let g = 2.0;
    let scaled = separate(&x1.scaled(g), &x2.scaled(g), &cfg.sampler, &cfg.bss, None, Seed(3)).unwrap();
    let (a, b) = (&base.diagnostics, &scaled.diagnostics);
    let rel = |x: f64, y: f64| (x - y).abs() / x.abs().max(y.abs());
    assert!(rel(b.second.q1, 4.0 * a.second.q1) < 1e-9);
    assert!(rel(b.second.q2, 4.0 * a.second.q2) < 1e-9);
    for (x, y) in [(a.fourth.p1, b.fourth.p1), (a.fourth.p2, b.fourth.p2), (a.fourth.p3, b.fourth.p3)] {
        assert!(rel(y, 16.0 * x) < 1e-9, "{x} vs {y}");
    }
    assert!((a.second.theta0 - b.second.theta0).abs() < 1e-9);
    assert!((a.fourth.phi0 - b.fourth.phi0).abs() < 1e-9);
    assert_eq!(base.demixer.soi_channel, scaled.demixer.soi_channel);
}

#[test]
fn short_aperture_scenario_recovers_the_bits() {
    let sim = simulate(&small_scenario(), Seed(5), false).unwrap();
    assert_eq!(sim.trial.ber, Some(0.0));
    assert!(sim.trial.leakage_db < -20.0, "{}", sim.trial.leakage_db);
    assert!(sim.trial.eye_opening > 0.0);
}

#[test]
fn exported_scatter_has_two_clusters_along_x1() {
    let dir = tempfile::tempdir().unwrap();
    run_scenario(&small_scenario(), dir.path()).unwrap();
    let mut rdr = csv::Reader::from_path(dir.path().join("scatter.csv")).unwrap();
    assert_eq!(rdr.headers().unwrap(), vec!["t_s", "x1", "x2"]);
    let x1: Vec<f64> = rdr.records().map(|r| r.unwrap()[1].parse().unwrap()).collect();
    let near = |c: f64| x1.iter().filter(|v| (*v - c).abs() < 0.25).count();
    let (lo, mid, hi) = (near(-1.0), near(0.0), near(1.0));
    assert!(lo > 2 * mid && hi > 2 * mid, "counts near -1, 0, 1: {lo}, {mid}, {hi}");
}

#[test]
fn minimum_angle_counts_work_end_to_end() {
    let mut cfg = small_scenario();
    cfg.bss = toml::from_str("n_theta = 3\nn_phi = 4\nfourth_fit = \"shared_phase4\"").unwrap();
    let min = simulate(&cfg, Seed(5), false).unwrap();
    let full = simulate(&small_scenario(), Seed(5), false).unwrap();
    assert_eq!(min.trial.ber, Some(0.0));
    let d = (min.trial.phi0_deg - full.trial.phi0_deg).rem_euclid(90.0);
    assert!(d.min(90.0 - d) < 5.0, "{} vs {}", min.trial.phi0_deg, full.trial.phi0_deg);
}

#[test]
fn waveforms_on_different_grids_are_rejected() {
    let a = Waveform::new(1.0, vec![0.0; 10], "a").unwrap();
    let b = Waveform::new(2.0, vec![0.0; 10], "b").unwrap();
    let p = PulseTrain {
        period_s: 2.0,
        width_s: 1.0,
        shape: PulseShape::Rect,
        offset_s: 0.0,
    };
    assert!(separate(&a, &b, &p, &BssSettings::default(), None, Seed(0)).is_err());
}

fn cov_curve(c11: f64, c12: f64, c22: f64, t: f64) -> f64 {
    let (s, c) = t.sin_cos();
    c * c * c11 + 2.0 * s * c * c12 + s * s * c22
}

fn quartic_curve(k1: f64, k2: f64, dir: f64, phi: f64) -> f64 {
    let (s, c) = (phi - dir).sin_cos();
    k1 * c.powi(4) + k2 * s.powi(4) + 6.0 * c * c * s * s
}

fn spaced(n: usize, period: f64) -> Vec<f64> {
    (0..n).map(|k| k as f64 * period / n as f64).collect()
}

proptest! {
    #[test]
    fn three_theta_angles_match_many(b in prop::array::uniform4(-2.0f64..2.0), shift in 0.0f64..PI / 3.0) {
        let (c11, c12, c22) = (b[0] * b[0] + b[1] * b[1], b[0] * b[2] + b[1] * b[3], b[2] * b[2] + b[3] * b[3]);
        let few: Vec<f64> = spaced(3, PI).iter().map(|a| a + shift).collect();
        let many = spaced(12, PI);
        let m = |a: &[f64]| a.iter().map(|&t| cov_curve(c11, c12, c22, t)).collect::<Vec<_>>();
        let (Ok(f3), Ok(f12)) = (fit_second(&few, &m(&few)), fit_second(&many, &m(&many))) else {
            return Ok(());
        };
        prop_assume!(f12.q2 > 1e-6 * f12.q1);
        prop_assert!((f3.q1 - f12.q1).abs() <= 1e-9 * f12.q1);
        prop_assert!((f3.q2 - f12.q2).abs() <= 1e-9 * f12.q1);
        let d = (f3.theta0 - f12.theta0).rem_euclid(PI);
        prop_assert!(d.min(PI - d) <= 1e-6);
    }

    #[test]
    fn four_phi_angles_match_eight(k1 in 1.0f64..6.0, k2 in 1.0f64..6.0, dir in 0.0f64..PI / 2.0, jitter in prop::array::uniform4(0.0f64..0.5)) {
        prop_assume!((k1 - k2).abs() > 0.1 && ((k1 + k2) / 8.0 - 0.75).abs() > 0.05);
        let eight = spaced(8, PI);
        let four: Vec<f64> = spaced(4, PI).iter().zip(jitter).map(|(a, j)| a + j).collect();
        let m = |a: &[f64]| a.iter().map(|&p| quartic_curve(k1, k2, dir, p)).collect::<Vec<_>>();
        let f8 = fit_fourth(&eight, &m(&eight)).unwrap();
        let f4 = fit_fourth_shared_phase(&four, &m(&four), 1.0, &Tolerances::default()).unwrap();
        prop_assert!((f4.p1 - f8.p1).abs() <= 1e-8 && (f4.p3 - f8.p3).abs() <= 1e-8);
        let d = (f4.phi0 - f8.phi0).rem_euclid(PI / 2.0);
        prop_assert!(d.min(PI / 2.0 - d) <= 1e-8);
        // Near the wrap point the pair (p2, φ0) may come back as (−p2, φ0 + π/2).
        for a in spaced(36, PI) {
            prop_assert!((f4.eval(a) - f8.eval(a)).abs() <= 1e-8);
        }
    }
}
