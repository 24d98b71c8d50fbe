//! Harmonic fits of the moment-vs-angle curves.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use nalgebra::{DMatrix, DVector, Matrix4};
use serde::{Deserialize, Serialize};

use super::separate::Tolerances;
use crate::error::{Error, Result};

/// `m(θ) = q1 + q2·cos 2(θ − θ0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondMomentFit {
    pub q1: f64,
    pub q2: f64,
    /// Principal direction, in [0, π).
    pub theta0: f64,
}

impl SecondMomentFit {
    pub fn eval(&self, theta: f64) -> f64 {
        self.q1 + self.q2 * (2.0 * (theta - self.theta0)).cos()
    }
}

/// `m(φ) = p1 + p2·cos 2(φ − φ0) + p3·cos 4(φ − φ0)`.
///
/// `phi0` is reduced to [0, π/2); `p2` and `p3` carry the signs needed for
/// that reduced phase, so `|p2|` and `|p3|` are the harmonic amplitudes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourthMomentFit {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub phi0: f64,
    /// |cos 2(φ0 − ψ2)| where ψ2 is the free 2nd-harmonic phase; 1 when the
    /// two harmonics share a phase.
    pub phase_consistency: f64,
}

impl FourthMomentFit {
    pub fn eval(&self, phi: f64) -> f64 {
        let d = phi - self.phi0;
        self.p1 + self.p2 * (2.0 * d).cos() + self.p3 * (4.0 * d).cos()
    }
}

pub fn fit_second(angles: &[f64], moments: &[f64]) -> Result<SecondMomentFit> {
    fit_second_with(angles, moments, &Tolerances::default())
}

/// Least-squares fit of `c0 + c2·cos 2θ + s2·sin 2θ`; exact with three
/// well-posed angles.
pub fn fit_second_with(angles: &[f64], moments: &[f64], tol: &Tolerances) -> Result<SecondMomentFit> {
    check_lengths(angles, moments, 3)?;
    let c = harmonic_lstsq(angles, moments, &[2], tol.max_condition)?;
    let (q1, c2, s2) = (c[0], c[1], c[2]);
    let q2 = c2.hypot(s2);
    if q1 < q2 {
        return Err(Error::DegenerateFit(format!(
            "q1 = {q1:e} < q2 = {q2:e}: second principal power would be negative"
        )));
    }
    if q2 <= tol.isotropy * q1.abs() {
        return Err(Error::IsotropicMixture {
            ratio: if q1 != 0.0 { q2 / q1 } else { 0.0 },
        });
    }
    Ok(SecondMomentFit {
        q1,
        q2,
        theta0: wrap(0.5 * s2.atan2(c2), PI),
    })
}

pub fn fit_fourth(angles: &[f64], moments: &[f64]) -> Result<FourthMomentFit> {
    fit_fourth_with(angles, moments, &Tolerances::default())
}

/// Unconstrained five-coefficient fit (harmonics 0, 2, 4), then pick the
/// shared phase.
///
/// The 4th harmonic fixes φ0 modulo π/4 (sign of `p3` free). Between the two
/// candidates the one aligned with the 2nd-harmonic phase wins; if the 2nd
/// harmonic is negligible, the candidate where the fitted curve is lowest wins.
pub fn fit_fourth_with(angles: &[f64], moments: &[f64], tol: &Tolerances) -> Result<FourthMomentFit> {
    check_lengths(angles, moments, 5)?;
    let c = harmonic_lstsq(angles, moments, &[2, 4], tol.max_condition)?;
    let (c0, c2, s2, c4, s4) = (c[0], c[1], c[2], c[3], c[4]);
    let a2 = c2.hypot(s2);
    let a4 = c4.hypot(s4);
    if a4 <= tol.harmonic * c0.abs() {
        return Err(Error::NoFourthHarmonic {
            ratio: if c0 != 0.0 { a4 / c0 } else { 0.0 },
        });
    }
    let psi4 = 0.25 * s4.atan2(c4);
    let psi2 = 0.5 * s2.atan2(c2);
    let second_significant = a2 > tol.harmonic * c0.abs();
    let candidates = [psi4, psi4 + FRAC_PI_4];
    let phi = if second_significant {
        let score = |p: f64| (2.0 * (p - psi2)).cos().abs();
        if score(candidates[1]) > score(candidates[0]) {
            candidates[1]
        } else {
            candidates[0]
        }
    } else {
        // cos 4(φ − ψ4) = −1 here: the curve minimum.
        candidates[1]
    };
    let phi0 = wrap(phi, FRAC_PI_2);
    let (s2p, c2p) = (2.0 * phi0).sin_cos();
    let (s4p, c4p) = (4.0 * phi0).sin_cos();
    Ok(FourthMomentFit {
        p1: c0,
        p2: c2 * c2p + s2 * s2p,
        p3: c4 * c4p + s4 * s4p,
        phi0,
        phase_consistency: if second_significant {
            (2.0 * (phi0 - psi2)).cos().abs()
        } else {
            1.0
        },
    })
}

/// Shared-phase model solved directly for `(p1, p2, p3, φ0)`.
///
/// With exactly four angles there can be up to three exact solutions; the one
/// best satisfying `p1 − 3·p3 = 3·v²` (which holds for any pair of whitened
/// independent components with per-direction second moment `v`, passed as
/// `whitened_power`) is returned. With more
/// angles the least-squares minimum over φ0 is returned.
pub fn fit_fourth_shared_phase(
    angles: &[f64],
    moments: &[f64],
    whitened_power: f64,
    tol: &Tolerances,
) -> Result<FourthMomentFit> {
    check_lengths(angles, moments, 4)?;
    let roots = if angles.len() == 4 {
        exact_phase_roots(angles, moments)
    } else {
        rss_minima(angles, moments)
    };
    let mut best: Option<(f64, FourthMomentFit)> = None;
    for phi0 in roots {
        let Some((p, rss)) = shared_phase_linear(angles, moments, phi0, tol.max_condition) else {
            continue;
        };
        let score = if angles.len() == 4 {
            (p[0] - 3.0 * p[2] - 3.0 * whitened_power * whitened_power).abs()
        } else {
            rss
        };
        let fit = FourthMomentFit {
            p1: p[0],
            p2: p[1],
            p3: p[2],
            phi0,
            phase_consistency: 1.0,
        };
        if best.as_ref().is_none_or(|(s, _)| score < *s) {
            best = Some((score, fit));
        }
    }
    let (_, fit) = best.ok_or_else(|| Error::IllPosed("shared-phase model has no solution for these angles".into()))?;
    if fit.p3.abs() <= tol.harmonic * fit.p1.abs() {
        return Err(Error::NoFourthHarmonic {
            ratio: fit.p3.abs() / fit.p1.abs(),
        });
    }
    Ok(fit)
}

fn check_lengths(angles: &[f64], moments: &[f64], min: usize) -> Result<()> {
    if angles.len() != moments.len() {
        return Err(Error::Shape(format!("{} angles vs {} moments", angles.len(), moments.len())));
    }
    if angles.len() < min {
        return Err(Error::IllPosed(format!("need at least {min} angles, got {}", angles.len())));
    }
    if angles.iter().chain(moments).any(|v| !v.is_finite()) {
        return Err(Error::IllPosed("non-finite angle or moment".into()));
    }
    Ok(())
}

fn wrap(angle: f64, period: f64) -> f64 {
    let r = angle.rem_euclid(period);
    // rem_euclid can round up to exactly `period`.
    if r >= period {
        0.0
    } else {
        r
    }
}

/// Least squares on columns `[1, cos hθ, sin hθ for h in harmonics]`.
fn harmonic_lstsq(angles: &[f64], values: &[f64], harmonics: &[u32], max_condition: f64) -> Result<Vec<f64>> {
    let cols = 1 + 2 * harmonics.len();
    let design = DMatrix::from_fn(angles.len(), cols, |i, j| {
        if j == 0 {
            1.0
        } else {
            let h = harmonics[(j - 1) / 2] as f64;
            if j % 2 == 1 {
                (h * angles[i]).cos()
            } else {
                (h * angles[i]).sin()
            }
        }
    });
    solve_lstsq(design, values, max_condition)
        .ok_or_else(|| Error::IllPosed(format!("angles alias in the harmonic basis {harmonics:?} (condition number above {max_condition:e})")))
}

fn solve_lstsq(design: DMatrix<f64>, values: &[f64], max_condition: f64) -> Option<Vec<f64>> {
    let svd = design.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin <= 0.0 || smax / smin > max_condition {
        return None;
    }
    let b = DVector::from_column_slice(values);
    svd.solve(&b, 0.0).ok().map(|x| x.iter().copied().collect())
}

/// For fixed φ0 the shared-phase model is linear in `(p1, p2, p3)`.
fn shared_phase_linear(angles: &[f64], moments: &[f64], phi0: f64, max_condition: f64) -> Option<(Vec<f64>, f64)> {
    let design = DMatrix::from_fn(angles.len(), 3, |i, j| match j {
        0 => 1.0,
        1 => (2.0 * (angles[i] - phi0)).cos(),
        _ => (4.0 * (angles[i] - phi0)).cos(),
    });
    let p = solve_lstsq(design.clone(), moments, max_condition)?;
    let fitted = design * DVector::from_column_slice(&p);
    let rss = fitted.iter().zip(moments).map(|(f, m)| (f - m).powi(2)).sum();
    Some((p, rss))
}

const PHASE_SCAN_STEPS: usize = 7200;

// det[1, cos 2(φ−φ0), cos 4(φ−φ0), m] vanishes exactly where four points fit.
fn phase_determinant(angles: &[f64], moments: &[f64], phi0: f64) -> f64 {
    Matrix4::from_fn(|i, j| match j {
        0 => 1.0,
        1 => (2.0 * (angles[i] - phi0)).cos(),
        2 => (4.0 * (angles[i] - phi0)).cos(),
        _ => moments[i],
    })
    .determinant()
}

// Crossings of the determinant. Two roots closer than one scan step, or a
// double root, show no sign change on the grid, so extrema of the
// determinant are inspected as well.
fn exact_phase_roots(angles: &[f64], moments: &[f64]) -> Vec<f64> {
    let f = |p: f64| phase_determinant(angles, moments, p);
    let mut roots = sign_change_roots(f);
    let step = FRAC_PI_2 / PHASE_SCAN_STEPS as f64;
    let scale = (0..PHASE_SCAN_STEPS).map(|k| f(k as f64 * step).abs()).fold(0.0, f64::max);
    let h = 1e-7;
    let slope = |p: f64| (f(p + h) - f(p - h)) / (2.0 * h);
    for p in sign_change_roots(slope) {
        let (lo, mid, hi) = (f(p - step), f(p), f(p + step));
        if mid.signum() != lo.signum() && mid.signum() != hi.signum() {
            roots.push(wrap(bisect(&f, p - step, p, lo), FRAC_PI_2));
            roots.push(wrap(bisect(&f, p, p + step, mid), FRAC_PI_2));
        } else if mid.abs() <= TOUCH_TOLERANCE * scale {
            roots.push(p);
        }
    }
    roots
}

const TOUCH_TOLERANCE: f64 = 1e-9;

fn rss_minima(angles: &[f64], moments: &[f64]) -> Vec<f64> {
    let rss = |p: f64| {
        shared_phase_linear(angles, moments, p, f64::INFINITY)
            .map(|(_, r)| r)
            .unwrap_or(f64::INFINITY)
    };
    let h = 1e-6;
    let slope = |p: f64| (rss(p + h) - rss(p - h)) / (2.0 * h);
    sign_change_roots(slope)
        .into_iter()
        .filter(|&p| rss(p) <= rss(p + 1e-3) && rss(p) <= rss(p - 1e-3))
        .collect()
}

// Zero crossings of `f` over one π/2 period, refined by bisection. The scan
// starts off the round angles so a root at exactly 0 is not split across the
// wrap point, where rounding can hide its sign change.
fn sign_change_roots(f: impl Fn(f64) -> f64) -> Vec<f64> {
    let step = FRAC_PI_2 / PHASE_SCAN_STEPS as f64;
    let start = -0.382 * step;
    let mut roots = Vec::new();
    let mut prev = f(start);
    for k in 1..=PHASE_SCAN_STEPS {
        let (a0, b0) = (start + (k - 1) as f64 * step, start + k as f64 * step);
        let next = f(b0);
        if prev == 0.0 {
            roots.push(wrap(a0, FRAC_PI_2));
        } else if prev.signum() != next.signum() && next != 0.0 {
            roots.push(wrap(bisect(&f, a0, b0, prev), FRAC_PI_2));
        }
        prev = next;
    }
    roots
}

// Root of `f` in [a, b] given `f(a) = fa` and a sign change across the interval.
fn bisect(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, mut fa: f64) -> f64 {
    for _ in 0..80 {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}
