//! Synchronization and travelling-wave diagnostics on phase trajectories.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::integrate::PhaseTrajectory;
use crate::error::{Error, Result};

/// Kuramoto order parameter `r e^{iψ} = (1/N) Σ_j e^{iθ_j}`, returned as `(r, ψ)`.
pub fn order_parameter(theta: &[f64]) -> Result<(f64, f64)> {
    if theta.is_empty() {
        return Err(Error::invalid("order parameter of an empty phase vector"));
    }
    let (s, c) = theta.iter().fold((0.0, 0.0), |(s, c), x| (s + x.sin(), c + x.cos()));
    let n = theta.len() as f64;
    let (s, c) = (s / n, c / n);
    Ok((s.hypot(c).min(1.0), s.atan2(c)))
}

/// Order-parameter magnitude at every grid sample.
pub fn order_parameter_series(traj: &PhaseTrajectory) -> Vec<f64> {
    (0..traj.len()).map(|k| order_parameter(traj.row(k)).map(|(r, _)| r).unwrap_or(0.0)).collect()
}

/// Earliest time after which `flag` holds on every remaining sample.
fn sustained_onset(traj: &PhaseTrajectory, flag: impl Fn(usize) -> bool) -> Option<f64> {
    let m = traj.len();
    let mut first = m;
    for k in (0..m).rev() {
        if flag(k) {
            first = k;
        } else {
            break;
        }
    }
    (first < m).then(|| traj.time(first))
}

/// Earliest grid time `t*` with `r(t) ≥ threshold` for all samples from `t*` on.
pub fn detect_sync_onset(traj: &PhaseTrajectory, threshold: f64) -> Option<f64> {
    sustained_onset(traj, |k| order_parameter(traj.row(k)).map(|(r, _)| r >= threshold).unwrap_or(false))
}

/// Circular mean and circular standard deviation of a set of angles.
pub fn circular_stats(angles: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut s, mut c, mut n) = (0.0, 0.0, 0usize);
    for a in angles {
        s += a.sin();
        c += a.cos();
        n += 1;
    }
    if n == 0 {
        return (0.0, f64::INFINITY);
    }
    let (s, c) = (s / n as f64, c / n as f64);
    let r = s.hypot(c).min(1.0);
    let std = if r > 0.0 { (-2.0 * r.ln()).max(0.0).sqrt() } else { f64::INFINITY };
    (s.atan2(c), std)
}

fn neighbour_differences(row: &[f64]) -> impl Iterator<Item = f64> + '_ {
    row.windows(2).map(|w| w[1] - w[0])
}

/// Earliest grid time after which the nearest-neighbour phase differences stay
/// uniform across the chain (circular std ≤ `tol`) until the end of the grid.
pub fn detect_wave_onset(traj: &PhaseTrajectory, tol: f64) -> Option<f64> {
    if traj.n() < 2 {
        return None;
    }
    sustained_onset(traj, |k| circular_stats(neighbour_differences(traj.row(k))).1 <= tol)
}

/// Steady travelling-wave profile over a time window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveProfile {
    /// Circular mean of `θ_{i+1} − θ_i`, in `(−π, π]`.
    pub delta: f64,
    /// Least-squares slope of the mean (unwrapped) phase.
    pub omega_eff: f64,
    /// Circular standard deviation of the neighbour differences.
    pub circular_std: f64,
}

pub fn wave_profile(traj: &PhaseTrajectory, window: (f64, f64)) -> Result<WaveProfile> {
    let (a, b) = window;
    let tol = 1e-9 * traj.dt();
    if !(a <= b) || a < traj.start() - tol || b > traj.end() + tol {
        return Err(Error::invalid(format!("window [{a}, {b}] outside trajectory [{}, {}]", traj.start(), traj.end())));
    }
    if traj.n() < 2 {
        return Err(Error::invalid("wave profile needs at least two oscillators"));
    }
    let ks: Vec<usize> = (0..traj.len())
        .filter(|&k| {
            let t = traj.time(k);
            t >= a - tol && t <= b + tol
        })
        .collect();
    if ks.len() < 10 {
        return Err(Error::invalid(format!("window covers {} samples, need at least 10", ks.len())));
    }
    let (delta, circular_std) = circular_stats(ks.iter().flat_map(|&k| neighbour_differences(traj.row(k))));
    let n = traj.n() as f64;
    let pts: Vec<(f64, f64)> = ks.iter().map(|&k| (traj.time(k), traj.row(k).iter().sum::<f64>() / n)).collect();
    let omega_eff = least_squares_slope(&pts).0;
    Ok(WaveProfile { delta: wrap_angle(delta), omega_eff, circular_std })
}

/// Maps an angle to `(−π, π]`.
pub fn wrap_angle(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

/// Ordinary least squares `y = a + b x`; returns `(b, a, r²)`.
pub fn least_squares_slope(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return (0.0, my, 0.0);
    }
    let b = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) };
    (b, my - b * mx, r2)
}
