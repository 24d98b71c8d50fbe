//! Separation quality: gain alignment, BER, eye folding, φ0 spread, leakage.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat2::Mat2;
use crate::signal::Waveform;

/// Eye traces kept for export; the opening always uses every bit.
pub const EYE_MAX_TRACES: usize = 200;

/// Least-squares gain `g` minimising `‖g·recovered − reference‖²`.
pub fn alignment_gain(recovered: &Waveform, reference: &Waveform) -> Result<f64> {
    recovered.same_grid(reference)?;
    let energy: f64 = recovered.samples().iter().map(|v| v * v).sum();
    if energy == 0.0 || !energy.is_finite() {
        return Err(Error::DegenerateAlignment);
    }
    let cross: f64 = recovered.samples().iter().zip(reference.samples()).map(|(a, b)| a * b).sum();
    Ok(cross / energy)
}

/// `recovered` rescaled (and sign-corrected) onto `reference`.
pub fn align(recovered: &Waveform, reference: &Waveform) -> Result<Waveform> {
    let g = alignment_gain(recovered, reference)?;
    Ok(recovered.scaled(g))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BerResult {
    pub rate: f64,
    pub errors: usize,
    pub bits: usize,
    /// False when the bit period is not a whole number of grid steps and the
    /// decision windows were snapped to the nearest samples.
    pub commensurate: bool,
}

/// Sample index range `[lo, hi)` of the centre half of bit `i`.
fn decision_window(i: usize, samples_per_bit: f64) -> (usize, usize) {
    let start = i as f64 * samples_per_bit;
    let lo = (start + 0.25 * samples_per_bit).round() as usize;
    let hi = ((start + 0.75 * samples_per_bit).round() as usize).max(lo + 1);
    (lo, hi)
}

fn samples_per_bit(w: &Waveform, bit_period: f64) -> Result<(f64, bool)> {
    if !(bit_period > 0.0 && bit_period.is_finite()) {
        return Err(Error::InvalidSpec(format!("bit period must be positive, got {bit_period}")));
    }
    let spb = bit_period / w.dt();
    Ok((spb, (spb - spb.round()).abs() < 1e-9 * spb))
}

/// Bit decisions: sign of the mean over the centre half of each bit.
pub fn decide_bits(w: &Waveform, n_bits: usize, bit_period: f64) -> Result<Vec<f64>> {
    let (spb, _) = samples_per_bit(w, bit_period)?;
    if decision_window(n_bits.saturating_sub(1), spb).1 > w.len() || n_bits == 0 {
        return Err(Error::Shape(format!("waveform of {} samples does not cover {n_bits} bits", w.len())));
    }
    Ok((0..n_bits)
        .map(|i| {
            let (lo, hi) = decision_window(i, spb);
            w.samples()[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect())
}

/// Bit error rate of an aligned waveform against binary reference symbols.
///
/// A decision statistic of exactly zero counts as an error.
pub fn ber(aligned: &Waveform, reference_bits: &[f64], bit_period: f64) -> Result<BerResult> {
    let (_, commensurate) = samples_per_bit(aligned, bit_period)?;
    let decisions = decide_bits(aligned, reference_bits.len(), bit_period)?;
    let errors = decisions
        .iter()
        .zip(reference_bits)
        .filter(|(d, r)| d.is_nan() || **d == 0.0 || (**d > 0.0) != (**r > 0.0))
        .count();
    Ok(BerResult {
        rate: errors as f64 / reference_bits.len() as f64,
        errors,
        bits: reference_bits.len(),
        commensurate,
    })
}

/// `10·log10(‖reference‖² / ‖aligned − reference‖²)`.
pub fn residual_snr_db(aligned: &Waveform, reference: &Waveform) -> Result<f64> {
    aligned.same_grid(reference)?;
    let sig: f64 = reference.samples().iter().map(|v| v * v).sum();
    let err: f64 = aligned.samples().iter().zip(reference.samples()).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(10.0 * (sig / err).log10())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EyeDiagram {
    /// Time within the two-bit window, in bit periods (0 to 2).
    pub t_frac: Vec<f64>,
    /// Up to [`EYE_MAX_TRACES`] consecutive two-bit segments.
    pub traces: Vec<Vec<f64>>,
    /// `(min high rail − max low rail) / (mean high − mean low)` at mid-bit.
    pub opening: f64,
}

pub fn eye_data(w: &Waveform, bit_period: f64) -> Result<EyeDiagram> {
    eye_data_with(w, bit_period, EYE_MAX_TRACES)
}

/// Fold `w` modulo two bit periods.
///
/// Each bit is put on a rail by its decision statistic (centre-half mean) and
/// contributes its mid-bit sample to that rail; the opening compares the
/// rails at mid-bit. An empty rail gives opening 0.
pub fn eye_data_with(w: &Waveform, bit_period: f64, max_traces: usize) -> Result<EyeDiagram> {
    let (spb, _) = samples_per_bit(w, bit_period)?;
    let n_bits = (w.len() as f64 / spb).floor() as usize;
    if n_bits < 10 {
        return Err(Error::IllPosed(format!("eye diagram needs at least 10 bits, got {n_bits}")));
    }
    let decisions = decide_bits(w, n_bits, bit_period)?;
    let (mut hi_min, mut lo_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut hi_sum, mut hi_n, mut lo_sum, mut lo_n) = (0.0, 0usize, 0.0, 0usize);
    for (i, d) in decisions.iter().enumerate() {
        let mid = ((i as f64 + 0.5) * spb).floor() as usize;
        let v = w.samples()[mid.min(w.len() - 1)];
        if *d > 0.0 {
            hi_min = hi_min.min(v);
            hi_sum += v;
            hi_n += 1;
        } else {
            lo_max = lo_max.max(v);
            lo_sum += v;
            lo_n += 1;
        }
    }
    let opening = if hi_n == 0 || lo_n == 0 {
        0.0
    } else {
        (hi_min - lo_max) / (hi_sum / hi_n as f64 - lo_sum / lo_n as f64)
    };

    let span = (2.0 * spb).round() as usize;
    let t_frac = (0..span).map(|k| k as f64 / spb).collect();
    let traces = w
        .samples()
        .chunks_exact(span)
        .take(max_traces)
        .map(<[f64]>::to_vec)
        .collect();
    Ok(EyeDiagram {
        t_frac,
        traces,
        opening,
    })
}

/// Smallest arc (degrees) containing every φ0, taken modulo 90°.
pub fn phi0_spread(phi0_deg: &[f64]) -> f64 {
    if phi0_deg.len() < 2 {
        return 0.0;
    }
    let mut v: Vec<f64> = phi0_deg.iter().map(|p| p.rem_euclid(90.0)).collect();
    v.sort_by(f64::total_cmp);
    let wrap_gap = v[0] + 90.0 - v[v.len() - 1];
    let max_gap = v.windows(2).map(|w| w[1] - w[0]).fold(wrap_gap, f64::max);
    (90.0 - max_gap).max(0.0)
}

/// Cross-talk of a global system `G = D·A`, in dB.
///
/// Each row should pass one source; its leakage is the weaker entry over the
/// stronger one. Rows that both favour the same source give 0 dB.
pub fn leakage_db(g: &Mat2) -> f64 {
    let m = g.0;
    let dominant = |r: usize| usize::from(m[r][1].abs() > m[r][0].abs());
    if dominant(0) == dominant(1) {
        return 0.0;
    }
    (0..2)
        .map(|r| {
            let (a, b) = (m[r][0].abs(), m[r][1].abs());
            20.0 * (a.min(b) / a.max(b)).log10()
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Per-trial summary of a scenario run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub seed: u64,
    pub phi0_deg: f64,
    pub theta0_deg: f64,
    /// `None` for non-binary signals.
    pub ber: Option<f64>,
    pub eye_opening: f64,
    /// Recovered SOI against the transmitted one, after alignment.
    pub snr_db: f64,
    pub whiteness_residual: f64,
    pub soi_channel: u8,
    pub soi_kurtosis: f64,
    pub other_kurtosis: f64,
    /// Leakage of the learned demixer against the true mixing matrix.
    pub leakage_db: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nrz(bits: &[f64], spb: usize) -> Waveform {
        let s = bits.iter().flat_map(|&b| std::iter::repeat_n(b, spb)).collect();
        Waveform::new(0.25, s, "nrz").unwrap()
    }

    fn bits(n: usize) -> Vec<f64> {
        (0..n).map(|i| if (i * 7 + i / 3) % 5 < 2 { 1.0 } else { -1.0 }).collect()
    }

    #[test]
    fn alignment_resolves_sign_and_scale() {
        let r = nrz(&bits(40), 4);
        assert_eq!(alignment_gain(&r.scaled(-1.0), &r).unwrap(), -1.0);
        assert_eq!(align(&r.scaled(-1.0), &r).unwrap().samples(), r.samples());
        assert!((alignment_gain(&r.scaled(3.0), &r).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let zero = r.scaled(0.0);
        assert!(matches!(align(&zero, &r), Err(Error::DegenerateAlignment)));
    }

    #[test]
    fn alignment_ignores_orthogonal_noise() {
        // Alternating ±1 noise is orthogonal to a signal constant over sample pairs.
        let b = bits(40);
        let r = nrz(&b, 4);
        let noisy: Vec<f64> = r.samples().iter().enumerate().map(|(k, v)| v + if k % 2 == 0 { 0.3 } else { -0.3 }).collect();
        let noisy = Waveform::new(0.25, noisy, "n").unwrap();
        let energy: f64 = noisy.samples().iter().map(|v| v * v).sum();
        let g = alignment_gain(&noisy, &r).unwrap();
        let expected = r.samples().iter().map(|v| v * v).sum::<f64>() / energy;
        assert!((g - expected).abs() < 1e-15);
    }

    #[test]
    fn ber_of_clean_and_inverted_signals() {
        let b = bits(100);
        let w = nrz(&b, 4);
        assert_eq!(ber(&w, &b, 1.0).unwrap().rate, 0.0);
        assert_eq!(ber(&w.scaled(-1.0), &b, 1.0).unwrap().rate, 1.0);
        let aligned = align(&w.scaled(-2.0), &w).unwrap();
        let r = ber(&aligned, &b, 1.0).unwrap();
        assert_eq!(r.rate, 0.0);
        assert!(r.commensurate);
        assert!(!ber(&w, &b[..90], 1.1).unwrap().commensurate);
        assert!(matches!(ber(&w, &bits(101), 1.0), Err(Error::Shape(_))));
    }

    #[test]
    fn ber_counts_flipped_bits() {
        let b = bits(100);
        let mut flipped = b.clone();
        for i in [3, 50, 97] {
            flipped[i] = -flipped[i];
        }
        let r = ber(&nrz(&flipped, 8), &b, 2.0).unwrap();
        assert_eq!(r.errors, 3);
        assert_eq!(r.rate, 0.03);
    }

    #[test]
    fn clean_eye_is_fully_open() {
        let eye = eye_data(&nrz(&bits(300), 8), 2.0).unwrap();
        assert_eq!(eye.opening, 1.0);
        assert_eq!(eye.t_frac.len(), 16);
        assert_eq!(eye.traces.len(), 150);
        assert!(eye.traces.iter().all(|t| t.len() == 16));
        let few = eye_data_with(&nrz(&bits(300), 8), 2.0, 5).unwrap();
        assert_eq!(few.traces.len(), 5);
    }

    #[test]
    fn noise_eye_is_closed() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let s: Vec<f64> = (0..8000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let eye = eye_data(&Waveform::new(0.125, s, "n").unwrap(), 1.0).unwrap();
        assert!(eye.opening <= 0.0, "{}", eye.opening);
    }

    #[test]
    fn eye_needs_ten_bits() {
        assert!(eye_data(&nrz(&bits(9), 4), 1.0).is_err());
    }

    #[test]
    fn spread_wraps_at_ninety_degrees() {
        assert_eq!(phi0_spread(&[12.0, 12.0, 12.0]), 0.0);
        assert!((phi0_spread(&[89.0, 1.0]) - 2.0).abs() < 1e-12);
        assert!((phi0_spread(&[10.0, 20.0, 35.0]) - 25.0).abs() < 1e-12);
        assert!((phi0_spread(&[10.0, 110.0, -55.0]) - 25.0).abs() < 1e-12);
        assert_eq!(phi0_spread(&[3.0]), 0.0);
    }

    #[test]
    fn leakage_of_global_matrices() {
        assert_eq!(leakage_db(&Mat2::IDENTITY), f64::NEG_INFINITY);
        let g = Mat2([[0.01, 2.0], [1.0, 0.1]]);
        assert!((leakage_db(&g) + 20.0).abs() < 1e-12);
        assert_eq!(leakage_db(&Mat2([[1.0, 0.1], [1.0, 0.2]])), 0.0);
    }

    proptest::proptest! {
        #[test]
        fn ber_after_alignment_is_scale_invariant(c in proptest::prop_oneof![-50.0f64..-0.01, 0.01f64..50.0]) {
            let b = bits(64);
            let mut flipped = b.clone();
            flipped[10] = -flipped[10];
            let w = nrz(&flipped, 4);
            let base = ber(&align(&w, &nrz(&b, 4)).unwrap(), &b, 1.0).unwrap();
            let scaled = ber(&align(&w.scaled(c), &nrz(&b, 4)).unwrap(), &b, 1.0).unwrap();
            proptest::prop_assert_eq!(base, scaled);
        }

        #[test]
        fn spread_ignores_quarter_turns(
            phis in proptest::collection::vec(0.0f64..90.0, 2..20),
            turns in proptest::collection::vec(-3i32..4, 20),
        ) {
            let moved: Vec<f64> = phis.iter().zip(&turns).map(|(p, k)| p + 90.0 * *k as f64).collect();
            proptest::prop_assert!((phi0_spread(&phis) - phi0_spread(&moved)).abs() < 1e-9);
        }
    }
}
