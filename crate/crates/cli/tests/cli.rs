use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pulsebss"))
}

fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(format!("{name}.toml"))
}

/// A bundled config shrunk so each run takes well under a second.
fn small_config(dir: &Path, name: &str, extra: &[(&str, &str)]) -> PathBuf {
    let mut text = std::fs::read_to_string(bundled(name))
        .unwrap()
        .replace("n_bits = 200000", "n_bits = 20000")
        .replace("samples_per_bit = 32", "samples_per_bit = 8")
        .replace("period_s = 8e-7", "period_s = 8e-8");
    for (from, to) in extra {
        assert!(text.contains(from), "{from}");
        text = text.replace(from, to);
    }
    let path = dir.join(format!("{name}.toml"));
    std::fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_writes_artifacts_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "fig6_short", &[]);
    let out = dir.path().join("out");
    let o = run(&["run", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("ber 0e0"));
    assert!(String::from_utf8_lossy(&o.stderr).contains("elapsed"));
    for f in ["report.json", "scatter.csv", "moments_theta.csv", "moments_phi.csv", "eye.csv", "summary.csv", "config.toml"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn seed_flag_overrides_config_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "fig6_short", &[]);
    let outs: Vec<PathBuf> = ["a", "b", "c"].iter().map(|n| dir.path().join(n)).collect();
    for (out, seed) in outs.iter().zip(["7", "7", "8"]) {
        assert_eq!(code(&run(&["run", "--config", s(&cfg), "--out", s(out), "--seed", seed])), 0);
    }
    let read = |p: &Path| std::fs::read(p.join("summary.csv")).unwrap();
    assert_eq!(read(&outs[0]), read(&outs[1]));
    assert_ne!(read(&outs[0]), read(&outs[2]));
    let summary = String::from_utf8(read(&outs[0])).unwrap();
    assert!(summary.lines().nth(1).unwrap().starts_with("7,"));
}

#[test]
fn trials_and_detector_curve_write_their_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "fig7_trials_short", &[]);
    let out = dir.path().join("trials");
    assert_eq!(code(&run(&["trials", "--config", s(&cfg), "--n", "3", "--out", s(&out)])), 0);
    let text = std::fs::read_to_string(out.join("trials.csv")).unwrap();
    assert_eq!(text.lines().count(), 4);

    let out = dir.path().join("det");
    let o = run(&["detector-curve", "--config", s(&bundled("fig8_detector")), "--out", s(&out)]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("saturation -8.78 dBm"));
    let text = std::fs::read_to_string(out.join("detector_curve.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "power_dbm,v_peak_mean,v_peak_std,snr_db");
}

#[test]
fn gen_streams_waveforms_to_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "fig6_short", &[("n_bits = 20000", "n_bits = 20")]);
    let o = run(&["gen", "--config", s(&cfg)]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t_s,s_soi,s_int,x1,x2");
    assert_eq!(lines.count(), 20 * 8);
    assert_eq!(run(&["gen", "--config", s(&cfg)]).stdout, text.as_bytes());
}

#[test]
fn invalid_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let bad = small_config(dir.path(), "fig6_short", &[("bit_rate = 2e8", "bit_rate = -2e8")]);
    let o = run(&["run", "--config", s(&bad), "--out", s(&out)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));

    let garbage = dir.path().join("garbage.toml");
    std::fs::write(&garbage, "name = [").unwrap();
    assert_eq!(code(&run(&["run", "--config", s(&garbage), "--out", s(&out)])), 2);
    assert_eq!(code(&run(&["trials", "--config", s(&bundled("fig7_trials_short")), "--n", "1", "--out", s(&out)])), 2);
}

#[test]
fn degenerate_mixing_exits_three_and_leaves_no_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "fig6_short", &[("a12 = 0.5", "a12 = 1.0"), ("a21 = 0.5", "a21 = 1.0")]);
    let out = dir.path().join("out");
    let o = run(&["run", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read_dir(&out).map(|d| d.count()).unwrap_or(0), 0);
}

#[test]
fn io_failures_exit_four() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.toml");
    assert_eq!(code(&run(&["run", "--config", s(&missing), "--out", s(dir.path())])), 4);

    let cfg = small_config(dir.path(), "fig6_short", &[]);
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let o = run(&["run", "--config", s(&cfg), "--out", s(&blocker.join("sub"))]);
    assert_eq!(code(&o), 4);
    assert!(String::from_utf8_lossy(&o.stderr).contains("file"));
}
