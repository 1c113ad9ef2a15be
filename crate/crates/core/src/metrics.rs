//! Pulse diagnostics and the least-squares fits used by the experiments.

use serde::Serialize;

use crate::dynamics::{trapezoid, Trajectory};

/// Standard diagnostics of a non-negative profile `|E(z)|^2` on a uniform grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PulseMetrics {
    pub centroid: f64,
    pub fwhm: f64,
    pub peak: f64,
    pub norm: f64,
}

impl PulseMetrics {
    /// `None` for an identically zero profile.
    pub fn of(z: &[f64], intensity: &[f64]) -> Option<Self> {
        let dz = z.get(1).map_or(1.0, |z1| z1 - z[0]);
        let norm = trapezoid(intensity, dz);
        if !(norm > 0.0) {
            return None;
        }
        let moment: Vec<f64> = z.iter().zip(intensity).map(|(z, i)| z * i).collect();
        let peak = intensity.iter().cloned().fold(0.0, f64::max);
        Some(Self { centroid: trapezoid(&moment, dz) / norm, fwhm: fwhm(z, intensity)?, peak, norm })
    }
}

/// Full width at half maximum around the global maximum, with linearly
/// interpolated crossings. A crossing missing on one side falls back to the
/// grid edge.
pub fn fwhm(x: &[f64], y: &[f64]) -> Option<f64> {
    let (imax, &ymax) = y.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
    if !(ymax > 0.0) {
        return None;
    }
    let half = 0.5 * ymax;
    let cross = |i: usize, j: usize| x[i] + (half - y[i]) * (x[j] - x[i]) / (y[j] - y[i]);
    let left = (1..=imax).rev().find(|&i| y[i - 1] < half).map_or(x[0], |i| cross(i - 1, i));
    let right = (imax..y.len() - 1).find(|&i| y[i + 1] < half).map_or(x[y.len() - 1], |i| cross(i, i + 1));
    Some(right - left)
}

/// Upper envelope through the local maxima of `y`, linearly interpolated
/// back onto the grid. Used to measure localization of fringed profiles.
pub fn upper_envelope(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut peaks: Vec<usize> = (1..n.saturating_sub(1)).filter(|&i| y[i] >= y[i - 1] && y[i] > y[i + 1]).collect();
    if peaks.is_empty() {
        return y.to_vec();
    }
    if peaks[0] != 0 {
        peaks.insert(0, 0);
    }
    if *peaks.last().unwrap() != n - 1 {
        peaks.push(n - 1);
    }
    let mut out = vec![0.0; n];
    for w in peaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        for (i, o) in out.iter_mut().enumerate().take(b + 1).skip(a) {
            let f = (x[i] - x[a]) / (x[b] - x[a]);
            *o = y[a] + f * (y[b] - y[a]);
        }
    }
    // Interior local maxima are exact; the end points stay on the profile.
    for &p in &peaks {
        out[p] = y[p].max(out[p]);
    }
    out
}

/// Ordinary least squares `y = intercept + slope x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub rms_residual: f64,
    pub points: usize,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    Some(LinearFit { slope, intercept, rms_residual: (ss / n as f64).sqrt(), points: n })
}

/// Fit `ln y` against `x`; non-positive samples are rejected.
pub fn log_linear_fit(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    if y.iter().any(|v| !(*v > 0.0)) {
        return None;
    }
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear_fit(x, &ly)
}

/// Maximum excitation fraction over the grid, one entry per snapshot.
pub fn excitation_monitor(traj: &Trajectory) -> Vec<(f64, f64)> {
    traj.snapshots.iter().map(|s| (s.t(), s.state.max_excitation())).collect()
}
