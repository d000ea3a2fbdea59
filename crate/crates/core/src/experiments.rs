//! Presets for the two driven-chain experiments and the metrics that quantify them.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::cosim::{ChainModel, Evolution, InitialSelector, NetworkConfig, RunResult, RunSettings, Scenario};
use crate::error::{Error, Result};
use crate::fermion::{ChainParams, DensityMetrics, SpectrumSnapshot};
use crate::oscillator::{least_squares_slope, DriveModel};

/// Default band-splitting threshold, in units of the hopping `J`.
pub const GAP_THRESHOLD: f64 = 1.0;
/// Sites kept clear between the spreading front `X ± 3σ` and either edge.
pub const EDGE_MARGIN: f64 = 3.0;
pub const DEFAULT_SEED: u64 = 1;

/// All-to-all Kuramoto network driving an open Ising chain.
pub fn scenario_fig2() -> Scenario {
    Scenario {
        name: "fig2".into(),
        network: NetworkConfig::AllToAll { k_tilde: 0.5, omega: 0.5, omega_std: 0.0, drive: DriveModel::Kuramoto },
        chain: ChainParams::ising(30, 1.0, 3.0),
        run: RunSettings {
            model: ChainModel::Ising,
            classical_dt: 0.01,
            quantum_dt: 0.005,
            t_end: 40.0,
            snapshot_every: 0.1,
            seed: DEFAULT_SEED,
            initial_state: InitialSelector::QuasiparticleMaxIpr,
            evolution: Evolution::Propagator,
        },
    }
}

/// Zig-zag network with delayed unidirectional coupling driving an open XX chain.
pub fn scenario_fig3() -> Scenario {
    let omega = 0.04;
    Scenario {
        name: "fig3".into(),
        network: NetworkConfig::Zigzag {
            k1: 0.2,
            k2: 0.1,
            delay_sign: -1.0,
            omega,
            omega_std: 0.0,
            drive: DriveModel::Kuramoto,
        },
        chain: ChainParams::xx(30, 1.0, 3.0),
        run: RunSettings {
            model: ChainModel::Xx,
            classical_dt: 0.01,
            // RK4 phase error over the long run needs the finer step.
            quantum_dt: 0.00125,
            t_end: 200.0 / omega,
            snapshot_every: 1.0,
            seed: DEFAULT_SEED,
            initial_state: InitialSelector::MaxIprInRegion { first: 1, last: 10, min_weight: 0.5 },
            evolution: Evolution::State,
        },
    }
}

pub fn preset(name: &str) -> Option<Scenario> {
    match name {
        "fig2" => Some(scenario_fig2()),
        "fig3" => Some(scenario_fig3()),
        _ => None,
    }
}

/// Consecutive gaps of the sorted energies that exceed `gap_threshold`.
fn band_edges(energies: &[f64], gap_threshold: f64) -> Vec<f64> {
    let mut e = energies.to_vec();
    e.sort_by(f64::total_cmp);
    e.windows(2).map(|w| w[1] - w[0]).filter(|&g| g > gap_threshold).collect()
}

/// Number of clusters of the spectrum when split at gaps wider than `gap_threshold`.
pub fn band_count(spec: &SpectrumSnapshot, gap_threshold: f64) -> Result<usize> {
    band_count_of(&spec.energies, gap_threshold)
}

pub fn band_count_of(energies: &[f64], gap_threshold: f64) -> Result<usize> {
    if !(gap_threshold > 0.0) {
        return Err(Error::invalid(format!("gap threshold must be positive, got {gap_threshold}")));
    }
    if energies.is_empty() {
        return Ok(0);
    }
    Ok(band_edges(energies, gap_threshold).len() + 1)
}

/// Smallest gap separating two bands, `None` for a single band.
pub fn min_band_gap(energies: &[f64], gap_threshold: f64) -> Option<f64> {
    band_edges(energies, gap_threshold).into_iter().reduce(f64::min)
}

/// Centre-of-mass drift per drive period: least-squares slope of `X(t)` times `period`.
pub fn pump_rate(series: &[(f64, DensityMetrics)], period: f64) -> Result<f64> {
    if !(period > 0.0) || !period.is_finite() {
        return Err(Error::invalid(format!("drive period must be positive, got {period}")));
    }
    let (Some(first), Some(last)) = (series.first(), series.last()) else {
        return Err(Error::invalid("empty metrics series"));
    };
    if last.0 - first.0 < 2.0 * period * (1.0 - 1e-9) {
        return Err(Error::invalid(format!(
            "series spans {} but two periods ({}) are required",
            last.0 - first.0,
            2.0 * period
        )));
    }
    let pts: Vec<(f64, f64)> = series.iter().map(|(t, m)| (*t, m.center_of_mass)).collect();
    Ok(least_squares_slope(&pts).0 * period)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpreadingFit {
    pub exponent: f64,
    pub r2: f64,
    pub points: usize,
}

/// Power-law fit `variance ∝ (t − t_ref)^exponent` over the samples in `window`.
pub fn spreading_fit(series: &[(f64, f64)], window: (f64, f64), t_ref: f64) -> Result<SpreadingFit> {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|(t, v)| *t >= window.0 && *t <= window.1 && *t > t_ref && *v > 0.0)
        .map(|(t, v)| ((t - t_ref).ln(), v.ln()))
        .collect();
    if pts.len() < 10 {
        return Err(Error::invalid(format!("spreading window holds {} usable samples, need 10", pts.len())));
    }
    let (b, _, r2) = least_squares_slope(&pts);
    let flat = pts.iter().all(|p| (p.1 - pts[0].1).abs() <= 1e-12 * pts[0].1.abs().max(1.0));
    Ok(if flat {
        SpreadingFit { exponent: 0.0, r2: 0.0, points: pts.len() }
    } else {
        SpreadingFit { exponent: b, r2, points: pts.len() }
    })
}

/// End of the usable spreading window: the last time, from `start` on, at which
/// the packet `X ± 3σ` stays `EDGE_MARGIN` sites clear of both edges.
pub fn spreading_window_end(times: &[f64], metrics: &[DensityMetrics], n: usize, start: f64) -> f64 {
    let (lo, hi) = (1.0 + EDGE_MARGIN, n as f64 - EDGE_MARGIN);
    let mut end = start;
    for (t, m) in times.iter().zip(metrics) {
        if *t < start {
            continue;
        }
        let s = 3.0 * m.variance.max(0.0).sqrt();
        if m.center_of_mass - s < lo || m.center_of_mass + s > hi {
            break;
        }
        end = *t;
    }
    end
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub seed: u64,
    /// Synchronization onset (all-to-all) or travelling-wave onset (zig-zag).
    pub sync_onset: Option<f64>,
    pub gap_threshold: f64,
    pub band_count: Vec<usize>,
    /// Per snapshot; `None` when the spectrum forms a single band.
    pub band_gaps: Vec<Option<f64>>,
    /// Fit after onset, truncated before the packet nears the edges.
    pub spreading_fit: Option<SpreadingFit>,
    pub spreading_window: Option<(f64, f64)>,
    /// Fit before onset, referenced to `t = 0`.
    pub pre_onset_fit: Option<SpreadingFit>,
    pub pump_rate: Option<f64>,
    pub pump_window: Option<(f64, f64)>,
    pub drive_period: Option<f64>,
    pub wave_delta: Option<f64>,
    pub wave_std: Option<f64>,
    pub omega_eff: Option<f64>,
}

impl MetricReport {
    /// Fraction of snapshots in `[a, b]` for which `pred` holds.
    pub fn fraction(
        &self,
        times: &[f64],
        (a, b): (f64, f64),
        pred: impl Fn(usize, Option<f64>) -> bool,
    ) -> Option<f64> {
        let idx: Vec<usize> = (0..times.len()).filter(|&k| times[k] >= a && times[k] <= b).collect();
        if idx.is_empty() {
            return None;
        }
        let hits = idx.iter().filter(|&&k| pred(self.band_count[k], self.band_gaps[k])).count();
        Some(hits as f64 / idx.len() as f64)
    }

    /// Most frequent band count from onset on (smallest count on ties).
    pub fn post_onset_band_count(&self, times: &[f64]) -> Option<usize> {
        let t0 = self.sync_onset?;
        let mut counts = std::collections::BTreeMap::new();
        for (t, b) in times.iter().zip(&self.band_count) {
            if *t >= t0 {
                *counts.entry(*b).or_insert(0usize) += 1;
            }
        }
        let best = counts.values().copied().max()?;
        counts.into_iter().find(|(_, c)| *c == best).map(|(b, _)| b)
    }
}

/// Metrics of a finished run; a pure function of the stored result.
pub fn compute_metrics(r: &RunResult) -> MetricReport {
    let s = r.scenario();
    let j = s.chain.jx.abs().max(s.chain.jy.abs());
    let gap_threshold = GAP_THRESHOLD * if j > 0.0 { j } else { 1.0 };
    let band_count: Vec<usize> =
        r.spectra.iter().map(|sp| band_count_of(&sp.energies, gap_threshold).unwrap_or(0)).collect();
    let band_gaps = r.spectra.iter().map(|sp| min_band_gap(&sp.energies, gap_threshold)).collect();

    let d = &r.diagnostics;
    let zigzag = matches!(s.network, NetworkConfig::Zigzag { .. });
    let onset = if zigzag { d.wave_onset } else { d.sync_onset };
    let metrics = &r.observables.metrics;
    let has_density = metrics.len() == r.times.len();

    let mut report = MetricReport {
        seed: s.run.seed,
        sync_onset: onset,
        gap_threshold,
        band_count,
        band_gaps,
        spreading_fit: None,
        spreading_window: None,
        pre_onset_fit: None,
        pump_rate: None,
        pump_window: None,
        drive_period: None,
        wave_delta: d.wave.map(|w| w.delta),
        wave_std: d.wave.map(|w| w.circular_std),
        omega_eff: d.wave.map(|w| w.omega_eff),
    };
    if !has_density {
        return report;
    }
    let var: Vec<(f64, f64)> = r.times.iter().zip(metrics).map(|(t, m)| (*t, m.variance)).collect();
    if let Some(t0) = onset {
        let end = spreading_window_end(&r.times, metrics, s.chain.n, t0);
        report.spreading_window = Some((t0, end));
        report.spreading_fit = spreading_fit(&var, (t0, end), t0).ok();
        report.pre_onset_fit = spreading_fit(&var, (0.0, t0), 0.0).ok();
    }
    if let (true, Some(t0), Some(w)) = (zigzag, onset, d.wave) {
        if w.omega_eff != 0.0 {
            let period = 2.0 * PI / w.omega_eff.abs();
            let start = t0 + period;
            let series: Vec<(f64, DensityMetrics)> =
                r.times.iter().zip(metrics).filter(|(t, _)| **t >= start).map(|(t, m)| (*t, *m)).collect();
            report.drive_period = Some(period);
            report.pump_window = series.last().map(|l| (start, l.0));
            report.pump_rate = pump_rate(&series, period).ok();
        }
    }
    report
}
