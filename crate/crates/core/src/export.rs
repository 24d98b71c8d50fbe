//! CSV artifacts.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::bss::MomentMeasurement;
use crate::detector::SnrPoint;
use crate::error::{Error, Result};
use crate::metrics::{EyeDiagram, TrialReport};
use crate::signal::{SampleStream, Waveform};

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new().from_writer(BufWriter::new(file)))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::io(path, std::io::Error::other(format!("{other:?}"))),
    }
}

fn finish(path: &Path, mut w: csv::Writer<BufWriter<File>>) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))?;
    let inner = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    inner.into_inner().map_err(|e| Error::io(path, e.into_error()))?.sync_all().map_err(|e| Error::io(path, e))
}

macro_rules! rows {
    ($path:expr, $header:expr, $iter:expr) => {{
        let path: &Path = $path;
        let mut w = writer(path)?;
        w.write_record($header).map_err(|e| csv_err(path, e))?;
        for row in $iter {
            w.serialize(row).map_err(|e| csv_err(path, e))?;
        }
        finish(path, w)
    }};
}

/// `t_s,x1,x2`.
pub fn export_scatter(x1: &SampleStream, x2: &SampleStream, path: &Path) -> Result<()> {
    x1.same_times(x2)?;
    rows!(
        path,
        ["t_s", "x1", "x2"],
        x1.times.iter().zip(&x1.values).zip(&x2.values).map(|((t, a), b)| (t, a, b))
    )
}

/// `angle_deg,measured,fitted`: measured points with the fit at those angles,
/// then the fitted curve alone from 0° to 179° in 1° steps.
pub fn export_moment_curve(measurements: &[MomentMeasurement], fitted: impl Fn(f64) -> f64, path: &Path) -> Result<()> {
    let measured = measurements
        .iter()
        .map(|m| (m.angle_deg, Some(m.value), fitted(m.angle_deg.to_radians())));
    let curve = (0..180).map(|d| (d as f64, None, fitted((d as f64).to_radians())));
    rows!(path, ["angle_deg", "measured", "fitted"], measured.chain(curve))
}

/// `t_frac,trace_id,value`.
pub fn export_eye(eye: &EyeDiagram, path: &Path) -> Result<()> {
    rows!(
        path,
        ["t_frac", "trace_id", "value"],
        eye.traces
            .iter()
            .enumerate()
            .flat_map(|(id, tr)| eye.t_frac.iter().zip(tr).map(move |(t, v)| (t, id, v)))
    )
}

/// `seed,phi0_deg,theta0_deg,ber,eye_opening,whiteness`.
pub fn export_trials(trials: &[TrialReport], path: &Path) -> Result<()> {
    rows!(
        path,
        ["seed", "phi0_deg", "theta0_deg", "ber", "eye_opening", "whiteness"],
        trials
            .iter()
            .map(|t| (t.seed, t.phi0_deg, t.theta0_deg, t.ber, t.eye_opening, t.whiteness_residual))
    )
}

/// `power_dbm,v_peak_mean,v_peak_std,snr_db`.
pub fn export_detector_curve(points: &[SnrPoint], path: &Path) -> Result<()> {
    rows!(
        path,
        ["power_dbm", "v_peak_mean", "v_peak_std", "snr_db"],
        points.iter().map(|p| (p.power_dbm, p.v_peak_mean, p.v_peak_std, p.snr_db))
    )
}

/// `t_s,<label>...` for waveforms on a common grid.
pub fn write_waveforms<W: Write>(waves: &[&Waveform], out: W) -> Result<()> {
    let Some(first) = waves.first() else {
        return Err(Error::EmptyInput("no waveforms to write"));
    };
    for w in waves {
        first.same_grid(w)?;
    }
    let path = Path::new("<waveforms>");
    let mut w = csv::Writer::from_writer(out);
    let header: Vec<&str> = std::iter::once("t_s").chain(waves.iter().map(|w| w.label.as_str())).collect();
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    let mut row = Vec::with_capacity(waves.len() + 1);
    for k in 0..first.len() {
        row.clear();
        row.push(first.time(k));
        row.extend(waves.iter().map(|wave| wave.samples()[k]));
        w.serialize(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn export_waveforms(waves: &[&Waveform], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_waveforms(waves, BufWriter::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bss::SecondMomentFit;

    #[test]
    fn empty_scatter_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        export_scatter(&SampleStream::default(), &SampleStream::default(), &p).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "t_s,x1,x2\n");
    }

    #[test]
    fn moment_curve_peaks_at_theta0() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        let fit = SecondMomentFit {
            q1: 1.0,
            q2: 0.5,
            theta0: 30f64.to_radians(),
        };
        let meas = [MomentMeasurement {
            angle_deg: 0.0,
            value: 1.25,
        }];
        export_moment_curve(&meas, |t| fit.eval(t), &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "angle_deg,measured,fitted");
        assert!(lines[1].starts_with("0.0,1.25,1.25"));
        assert_eq!(lines.len(), 1 + 1 + 180);
        let row30: Vec<&str> = lines[2 + 30].split(',').collect();
        assert_eq!(row30[0], "30.0");
        assert_eq!(row30[1], "");
        assert!((row30[2].parse::<f64>().unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn unwritable_path_reports_the_path() {
        let p = Path::new("/nonexistent-dir/x.csv");
        let err = export_detector_curve(&[], p).unwrap_err();
        assert_eq!(err.exit_code(), 4);
        assert!(err.to_string().contains("/nonexistent-dir/x.csv"));
    }

    #[test]
    fn waveforms_share_one_time_column() {
        let a = Waveform::new(0.5, vec![1.0, 2.0], "x1").unwrap();
        let b = Waveform::new(0.5, vec![-1.0, 0.25], "x2").unwrap();
        let mut out = Vec::new();
        write_waveforms(&[&a, &b], &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "t_s,x1,x2\n0.0,1.0,-1.0\n0.5,2.0,0.25\n");
    }
}
