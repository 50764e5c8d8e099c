//! Sinusoid fitting and the synchronization verdict.
//!
//! A series is fitted to `A cos(ωt + φ) + B`: the FFT peak of the
//! zero-padded, mean-free series seeds `ω`, a golden-section search refines
//! it on the least-squares residual, and the linear coefficients are solved
//! exactly at each trial frequency.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyncThresholds {
    /// Largest relative frequency mismatch between the two series.
    #[serde(default = "d_freq")]
    pub frequency_rel: f64,
    /// Largest residual RMS relative to the fitted amplitude.
    #[serde(default = "d_resid")]
    pub residual_rel: f64,
    /// Largest relative amplitude change between the window halves.
    #[serde(default = "d_drift")]
    pub drift_rel: f64,
    /// Phase tolerance (radians) for in-phase / anti-phase labels.
    #[serde(default = "d_phase")]
    pub phase_tol: f64,
    /// Amplitudes below this count as no oscillation.
    #[serde(default = "d_amp")]
    pub min_amplitude: f64,
    /// Minimum window length in periods of the seed frequency.
    #[serde(default = "d_periods")]
    pub min_periods: f64,
}

fn d_freq() -> f64 {
    0.01
}
fn d_resid() -> f64 {
    0.05
}
fn d_drift() -> f64 {
    0.02
}
fn d_phase() -> f64 {
    0.1
}
fn d_amp() -> f64 {
    1e-3
}
fn d_periods() -> f64 {
    2.0
}

impl Default for SyncThresholds {
    fn default() -> Self {
        SyncThresholds {
            frequency_rel: d_freq(),
            residual_rel: d_resid(),
            drift_rel: d_drift(),
            phase_tol: d_phase(),
            min_amplitude: d_amp(),
            min_periods: d_periods(),
        }
    }
}

impl SyncThresholds {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.frequency_rel,
            self.residual_rel,
            self.drift_rel,
            self.phase_tol,
            self.min_amplitude,
            self.min_periods,
        ];
        if all.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::config("sync thresholds must be finite and >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinusoidFit {
    /// Angular frequency `ω` (units of `J`).
    pub frequency: f64,
    pub amplitude: f64,
    /// `φ` in `(-π, π]`, referred to `t = 0`.
    pub phase: f64,
    pub offset: f64,
    pub residual_rms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseRelation {
    InPhase,
    AntiPhase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyncVerdict {
    pub synchronized: bool,
    pub frequency: Option<f64>,
    pub relative_phase: Option<PhaseRelation>,
    /// Smaller of the two fitted amplitudes.
    pub amplitude: f64,
    /// Larger of the two residual RMS values relative to amplitude.
    pub residual_noise: f64,
    /// Larger of the two relative amplitude drifts between window halves.
    pub drift: f64,
    pub fits: [SinusoidFit; 2],
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y <= -PI {
        y + 2.0 * PI
    } else {
        y
    }
}

fn check_uniform(times: &[f64]) -> Result<f64> {
    if times.len() < 8 {
        return Err(Error::InsufficientData(format!(
            "{} samples in the fit window",
            times.len()
        )));
    }
    let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    if !(dt > 0.0) || times.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-6 * dt) {
        return Err(Error::InsufficientData("samples are not uniformly spaced".into()));
    }
    Ok(dt)
}

/// Angular frequency of the largest non-zero FFT peak of the mean-free series.
pub fn fft_peak(values: &[f64], dt: f64) -> f64 {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let padded = (8 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = values
        .iter()
        .map(|v| Complex::new(v - mean, 0.0))
        .chain(std::iter::repeat_n(Complex::new(0.0, 0.0), padded - n))
        .collect();
    FftPlanner::new().plan_fft_forward(padded).process(&mut buf);
    let (k, _) = buf[1..padded / 2]
        .iter()
        .enumerate()
        .fold((0, -1.0), |best, (i, z)| {
            let p = z.norm_sqr();
            if p > best.1 {
                (i + 1, p)
            } else {
                best
            }
        });
    2.0 * PI * k as f64 / (padded as f64 * dt)
}

/// Least-squares `A cos(ωt + φ) + B` at fixed `ω`.
pub fn fit_at_frequency(times: &[f64], values: &[f64], omega: f64) -> SinusoidFit {
    let mut ata = Matrix3::<f64>::zeros();
    let mut atb = Vector3::<f64>::zeros();
    for (&t, &y) in times.iter().zip(values) {
        let row = Vector3::new((omega * t).cos(), (omega * t).sin(), 1.0);
        ata += row * row.transpose();
        atb += row * y;
    }
    let coef = ata
        .cholesky()
        .map(|c| c.solve(&atb))
        .unwrap_or_else(|| {
            // degenerate basis (ω ≈ 0): constant fit only
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            Vector3::new(0.0, 0.0, mean)
        });
    let (a, b, c) = (coef[0], coef[1], coef[2]);
    let mut ss = 0.0;
    for (&t, &y) in times.iter().zip(values) {
        let r = y - (a * (omega * t).cos() + b * (omega * t).sin() + c);
        ss += r * r;
    }
    SinusoidFit {
        frequency: omega,
        amplitude: a.hypot(b),
        phase: wrap_angle((-b).atan2(a)),
        offset: c,
        residual_rms: (ss / values.len() as f64).sqrt(),
    }
}

/// Full fit with FFT seed and golden-section refinement.
pub fn fit_sinusoid(times: &[f64], values: &[f64]) -> Result<SinusoidFit> {
    if times.len() != values.len() {
        return Err(Error::structural("times and values differ in length"));
    }
    let dt = check_uniform(times)?;
    let seed = fft_peak(values, dt);
    let span = times[times.len() - 1] - times[0];
    let half_width = PI / span;
    let (mut lo, mut hi) = ((seed - half_width).max(1e-12), seed + half_width);
    let cost = |w: f64| fit_at_frequency(times, values, w).residual_rms;
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (cost(x1), cost(x2));
    for _ in 0..80 {
        if hi - lo <= 1e-12 * seed.max(1.0) {
            break;
        }
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = cost(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = cost(x2);
        }
    }
    Ok(fit_at_frequency(times, values, 0.5 * (lo + hi)))
}

/// Indices of `times` inside `[start, end]`.
pub fn window_indices(times: &[f64], start: f64, end: f64) -> std::ops::Range<usize> {
    let a = times.partition_point(|&t| t < start - 1e-9);
    let b = times.partition_point(|&t| t <= end + 1e-9);
    a..b.max(a)
}

fn relative_drift(times: &[f64], values: &[f64], omega: f64) -> f64 {
    let mid = times.len() / 2;
    let a = fit_at_frequency(&times[..mid], &values[..mid], omega).amplitude;
    let b = fit_at_frequency(&times[mid..], &values[mid..], omega).amplitude;
    let scale = 0.5 * (a + b);
    if scale > 0.0 {
        (a - b).abs() / scale
    } else {
        0.0
    }
}

/// Decides whether two series oscillate together inside `window`.
pub fn detect_sync(
    times: &[f64],
    series_a: &[f64],
    series_b: &[f64],
    window: (f64, f64),
    th: &SyncThresholds,
) -> Result<SyncVerdict> {
    if series_a.len() != times.len() || series_b.len() != times.len() {
        return Err(Error::structural("series are not sampled identically"));
    }
    let r = window_indices(times, window.0, window.1);
    let t = &times[r.clone()];
    let (a, b) = (&series_a[r.clone()], &series_b[r]);
    let dt = check_uniform(t)?;
    let span = t[t.len() - 1] - t[0];
    // flat series: nothing oscillates, so no period requirement applies
    let swing = |v: &[f64]| {
        let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), x| (l.min(*x), h.max(*x)));
        0.5 * (hi - lo)
    };
    if swing(a).max(swing(b)) < th.min_amplitude {
        let fits = [fit_at_frequency(t, a, 0.0), fit_at_frequency(t, b, 0.0)];
        return Ok(SyncVerdict {
            synchronized: false,
            frequency: None,
            relative_phase: None,
            amplitude: swing(a).min(swing(b)),
            residual_noise: f64::INFINITY,
            drift: 0.0,
            fits,
        });
    }
    let seed = fft_peak(a, dt).max(fft_peak(b, dt));
    if seed * span < th.min_periods * 2.0 * PI {
        return Err(Error::InsufficientData(format!(
            "window of {span:.3} covers fewer than {} periods at frequency {seed:.4}",
            th.min_periods
        )));
    }
    let fits = [fit_sinusoid(t, a)?, fit_sinusoid(t, b)?];
    let amplitude = fits[0].amplitude.min(fits[1].amplitude);
    let residual_noise = fits
        .iter()
        .map(|f| {
            if f.amplitude > 0.0 {
                f.residual_rms / f.amplitude
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max);
    let mean_freq = 0.5 * (fits[0].frequency + fits[1].frequency);
    let freq_ok = (fits[0].frequency - fits[1].frequency).abs() <= th.frequency_rel * mean_freq;
    let drift = relative_drift(t, a, mean_freq).max(relative_drift(t, b, mean_freq));
    let synchronized = amplitude >= th.min_amplitude
        && freq_ok
        && residual_noise <= th.residual_rel
        && drift <= th.drift_rel;
    let dphi = wrap_angle(fits[0].phase - fits[1].phase);
    let relative_phase = if amplitude < th.min_amplitude {
        None
    } else if dphi.abs() < th.phase_tol {
        Some(PhaseRelation::InPhase)
    } else if wrap_angle(dphi - PI).abs() < th.phase_tol {
        Some(PhaseRelation::AntiPhase)
    } else {
        None
    };
    Ok(SyncVerdict {
        synchronized,
        frequency: synchronized.then_some(mean_freq),
        relative_phase,
        amplitude,
        residual_noise,
        drift,
        fits,
    })
}

/// Signed per-site amplitudes at frequency `omega`: the sign is `+` for sites
/// within `π/2` of the phase of the first site with amplitude above `floor`.
pub fn site_pattern(
    times: &[f64],
    sites: &[Vec<f64>],
    omega: f64,
    floor: f64,
) -> Vec<f64> {
    let fits: Vec<SinusoidFit> = sites
        .iter()
        .map(|s| fit_at_frequency(times, s, omega))
        .collect();
    let reference = fits
        .iter()
        .find(|f| f.amplitude > floor)
        .map_or(0.0, |f| f.phase);
    fits.iter()
        .map(|f| {
            if wrap_angle(f.phase - reference).abs() <= PI / 2.0 {
                f.amplitude
            } else {
                -f.amplitude
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, dt: f64) -> Vec<f64> {
        (0..n).map(|k| k as f64 * dt).collect()
    }

    #[test]
    fn exact_antiphase_pair() {
        let t = grid(2000, 0.05);
        let a: Vec<f64> = t.iter().map(|x| 0.3 * (2.0 * x).cos() + 0.1).collect();
        let b: Vec<f64> = t.iter().map(|x| -0.3 * (2.0 * x).cos() - 0.2).collect();
        let v = detect_sync(&t, &a, &b, (0.0, 100.0), &SyncThresholds::default()).unwrap();
        assert!(v.synchronized);
        assert!((v.frequency.unwrap() - 2.0).abs() < 1e-8);
        assert_eq!(v.relative_phase, Some(PhaseRelation::AntiPhase));
        assert!((v.amplitude - 0.3).abs() < 1e-8);
    }

    #[test]
    fn in_phase_with_offset_phase() {
        let t = grid(1500, 0.05);
        let a: Vec<f64> = t.iter().map(|x| 0.5 * (1.3 * x + 0.7).cos()).collect();
        let b: Vec<f64> = t.iter().map(|x| 0.2 * (1.3 * x + 0.72).cos()).collect();
        let v = detect_sync(&t, &a, &b, (10.0, 70.0), &SyncThresholds::default()).unwrap();
        assert!(v.synchronized);
        assert_eq!(v.relative_phase, Some(PhaseRelation::InPhase));
        assert!((v.fits[0].phase - 0.7).abs() < 1e-6);
    }

    #[test]
    fn different_frequencies_not_synchronized() {
        let t = grid(2000, 0.05);
        let a: Vec<f64> = t.iter().map(|x| (2.0 * x).cos()).collect();
        let b: Vec<f64> = t.iter().map(|x| (2.3 * x).cos()).collect();
        let v = detect_sync(&t, &a, &b, (0.0, 100.0), &SyncThresholds::default()).unwrap();
        assert!(!v.synchronized);
        assert_eq!(v.frequency, None);
    }

    #[test]
    fn decaying_amplitude_fails_drift() {
        let t = grid(2000, 0.05);
        let a: Vec<f64> = t.iter().map(|x| (-0.01 * x).exp() * (2.0 * x).cos()).collect();
        let v = detect_sync(&t, &a, &a, (0.0, 100.0), &SyncThresholds::default()).unwrap();
        assert!(!v.synchronized);
        assert!(v.drift > 0.02);
    }

    #[test]
    fn short_window_is_insufficient() {
        let t = grid(2000, 0.05);
        let a: Vec<f64> = t.iter().map(|x| (0.5 * x).cos()).collect();
        let r = detect_sync(&t, &a, &a, (0.0, 15.0), &SyncThresholds::default());
        assert!(matches!(r, Err(Error::InsufficientData(_))));
    }

    #[test]
    fn flat_series_are_unsynchronized() {
        let t = grid(500, 0.05);
        let a: Vec<f64> = t.iter().map(|x| 0.2 + 1e-5 * x.sin()).collect();
        let v = detect_sync(&t, &a, &a, (0.0, 25.0), &SyncThresholds::default()).unwrap();
        assert!(!v.synchronized && v.frequency.is_none());
    }

    #[test]
    fn pattern_signs() {
        let t = grid(1000, 0.05);
        let sites: Vec<Vec<f64>> = [1.0, -1.0, 0.0, 0.5]
            .iter()
            .map(|c| t.iter().map(|x| c * (2.0 * x + 0.3).cos()).collect())
            .collect();
        let p = site_pattern(&t, &sites, 2.0, 1e-6);
        let expect = [1.0, -1.0, 0.0, 0.5];
        for (a, b) in p.iter().zip(expect) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn wraps_angles() {
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(0.1) - 0.1).abs() < 1e-15);
    }
}
