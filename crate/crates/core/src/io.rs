//! Run directories: CSV tables, the manifest, and reloading a stored run.
//!
//! Floats are written with 17 significant digits so every stored value parses
//! back to the same bits. Missing values are empty fields.

use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cosim::{ChainModel, Diagnostics, EigenSnapshot, InitialInfo, Manifest, Observables, RunResult};
use crate::error::{Error, Result};
use crate::experiments::MetricReport;
use crate::fermion::{DefectStats, DensityMetrics, SpectrumKind, SpectrumSnapshot};
use crate::oscillator::{PhaseTrajectory, TrajectoryMeta, WaveProfile};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const SPECTRA_FILE: &str = "spectra.csv";
pub const OBSERVABLES_FILE: &str = "observables.csv";
pub const SIGMA_Z_FILE: &str = "sigma_z.csv";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const RUN_INFO_FILE: &str = "diagnostics.json";
pub const METRICS_FILE: &str = "metrics.csv";
pub const BANDS_FILE: &str = "bands.csv";
pub const SUMMARY_FILE: &str = "ensemble_summary.csv";

pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_path(path)?)
}

/// Which per-site series `observables.csv` holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservableColumn {
    /// Density of the tracked excitation.
    Density,
    /// `⟨σ^z_j⟩` (Ising runs without a tracked excitation).
    SigmaZ,
}

/// Run-level values that do not fit a per-snapshot table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RunInfo {
    observable: ObservableColumn,
    sync_onset: Option<f64>,
    wave_onset: Option<f64>,
    wave: Option<WaveProfile>,
    defect: DefectStats,
    final_defect: f64,
    max_norm_defect: f64,
    initial: InitialInfo,
    trajectory_t0: f64,
    trajectory_dt: f64,
    trajectory_meta: TrajectoryMeta,
}

pub fn write_trajectory_csv(path: &Path, traj: &PhaseTrajectory) -> Result<()> {
    let n = traj.n();
    let mut w = csv_writer(path)?;
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("theta_{i}")));
    if traj.has_amplitudes() {
        header.extend((1..=n).map(|i| format!("r_{i}")));
    }
    w.write_record(&header)?;
    for k in 0..traj.len() {
        let mut row = vec![fmt_float(traj.time(k))];
        row.extend(traj.row(k).iter().map(|&x| fmt_float(x)));
        if let Some(r) = traj.amplitude_row(k) {
            row.extend(r.iter().map(|&x| fmt_float(x)));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_spectra_csv(path: &Path, spectra: &[SpectrumSnapshot]) -> Result<()> {
    let m = spectra.first().map_or(0, |s| s.energies.len());
    let mut w = csv_writer(path)?;
    let mut header = vec!["t".to_string()];
    header.extend((1..=m).map(|i| format!("e_{i}")));
    w.write_record(&header)?;
    for s in spectra {
        if s.energies.len() != m {
            return Err(Error::invalid("spectra have differing lengths"));
        }
        let mut row = vec![fmt_float(s.t)];
        row.extend(s.energies.iter().map(|&e| fmt_float(e)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Long `t,site,value` table, sites 1-based.
fn write_site_series(path: &Path, times: &[f64], rows: &[Vec<f64>], extra: Option<(&str, &[Vec<f64>])>) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["t", "site", "value"];
    if let Some((name, _)) = extra {
        header.push(name);
    }
    w.write_record(&header)?;
    for (k, (t, row)) in times.iter().zip(rows).enumerate() {
        for (j, v) in row.iter().enumerate() {
            let mut rec = vec![fmt_float(*t), (j + 1).to_string(), fmt_float(*v)];
            if let Some((_, e)) = extra {
                rec.push(fmt_float(e[k][j]));
            }
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_diagnostics_csv(path: &Path, r: &RunResult) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["t", "order_parameter", "energy", "ipr", "center_of_mass", "variance"])?;
    let obs = &r.observables;
    for (k, t) in r.times.iter().enumerate() {
        let m = obs.metrics.get(k);
        w.write_record([
            fmt_float(*t),
            fmt_opt(r.diagnostics.order_parameter.get(k).copied()),
            fmt_opt(obs.energy.get(k).copied()),
            fmt_opt(m.map(|m| m.ipr)),
            fmt_opt(m.map(|m| m.center_of_mass)),
            fmt_opt(m.map(|m| m.variance)),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Scalar metrics as `metric,value` rows.
pub fn write_metrics_csv(path: &Path, m: &MetricReport, times: &[f64]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["metric", "value"])?;
    let int = |x: Option<usize>| x.map(|v| v.to_string()).unwrap_or_default();
    let rows: Vec<(&str, String)> = vec![
        ("seed", m.seed.to_string()),
        ("sync_onset", fmt_opt(m.sync_onset)),
        ("gap_threshold", fmt_float(m.gap_threshold)),
        ("band_count", int(m.post_onset_band_count(times))),
        ("spreading_exponent", fmt_opt(m.spreading_fit.map(|f| f.exponent))),
        ("spreading_r2", fmt_opt(m.spreading_fit.map(|f| f.r2))),
        ("spreading_points", int(m.spreading_fit.map(|f| f.points))),
        ("spreading_window_start", fmt_opt(m.spreading_window.map(|w| w.0))),
        ("spreading_window_end", fmt_opt(m.spreading_window.map(|w| w.1))),
        ("pre_onset_exponent", fmt_opt(m.pre_onset_fit.map(|f| f.exponent))),
        ("pre_onset_r2", fmt_opt(m.pre_onset_fit.map(|f| f.r2))),
        ("pump_rate", fmt_opt(m.pump_rate)),
        ("pump_window_start", fmt_opt(m.pump_window.map(|w| w.0))),
        ("pump_window_end", fmt_opt(m.pump_window.map(|w| w.1))),
        ("drive_period", fmt_opt(m.drive_period)),
        ("wave_delta", fmt_opt(m.wave_delta)),
        ("wave_std", fmt_opt(m.wave_std)),
        ("omega_eff", fmt_opt(m.omega_eff)),
    ];
    for (k, v) in rows {
        w.write_record([k, v.as_str()])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-snapshot band count and smallest inter-band gap.
pub fn write_bands_csv(path: &Path, m: &MetricReport, times: &[f64]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["t", "band_count", "min_band_gap"])?;
    for ((t, b), g) in times.iter().zip(&m.band_count).zip(&m.band_gaps) {
        w.write_record([fmt_float(*t), b.to_string(), fmt_opt(*g)])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the full run directory (created if missing).
pub fn write_run(dir: &Path, r: &RunResult, metrics: &MetricReport) -> Result<()> {
    fs::create_dir_all(dir)?;
    let obs = &r.observables;
    let column = if obs.density.is_empty() { ObservableColumn::SigmaZ } else { ObservableColumn::Density };

    let mut f = File::create(dir.join(MANIFEST_FILE))?;
    serde_json::to_writer_pretty(&mut f, &r.manifest)?;
    writeln!(f)?;

    write_trajectory_csv(&dir.join(TRAJECTORY_FILE), &r.trajectory)?;
    write_spectra_csv(&dir.join(SPECTRA_FILE), &r.spectra)?;
    let main = match column {
        ObservableColumn::Density => &obs.density,
        ObservableColumn::SigmaZ => &obs.sigma_z,
    };
    write_site_series(&dir.join(OBSERVABLES_FILE), &r.times, main, None)?;
    if !obs.sigma_z.is_empty() {
        write_site_series(
            &dir.join(SIGMA_Z_FILE),
            &r.times,
            &obs.sigma_z,
            Some(("deviation", &obs.sigma_z_deviation)),
        )?;
    }
    write_diagnostics_csv(&dir.join(DIAGNOSTICS_FILE), r)?;

    let d = &r.diagnostics;
    let info = RunInfo {
        observable: column,
        sync_onset: d.sync_onset,
        wave_onset: d.wave_onset,
        wave: d.wave,
        defect: d.defect,
        final_defect: d.final_defect,
        max_norm_defect: d.max_norm_defect,
        initial: d.initial,
        trajectory_t0: r.trajectory.start(),
        trajectory_dt: r.trajectory.dt(),
        trajectory_meta: r.trajectory.meta.clone(),
    };
    let mut f = File::create(dir.join(RUN_INFO_FILE))?;
    serde_json::to_writer_pretty(&mut f, &info)?;
    writeln!(f)?;

    write_metrics_csv(&dir.join(METRICS_FILE), metrics, &r.times)?;
    write_bands_csv(&dir.join(BANDS_FILE), metrics, &r.times)?;
    Ok(())
}

/// A parsed CSV table: header plus string records.
pub struct Table {
    pub file: PathBuf,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Table> {
        let mut r = csv::Reader::from_path(path)?;
        let header = r.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            rows.push(rec?.iter().map(str::to_string).collect());
        }
        Ok(Table { file: path.to_path_buf(), header, rows })
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Format { file: self.file.display().to_string(), msg: msg.into() }
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.header.iter().position(|h| h == name).ok_or_else(|| self.err(format!("missing column {name}")))
    }

    pub fn float(&self, row: usize, col: usize) -> Result<f64> {
        let s = &self.rows[row][col];
        s.parse().map_err(|_| self.err(format!("row {}: {s:?} is not a number", row + 1)))
    }

    pub fn opt_float(&self, row: usize, col: usize) -> Result<Option<f64>> {
        if self.rows[row][col].is_empty() {
            Ok(None)
        } else {
            self.float(row, col).map(Some)
        }
    }

    /// Rows as numbers from column `from` on.
    pub fn numeric_rows(&self, from: usize) -> Result<Vec<Vec<f64>>> {
        (0..self.rows.len()).map(|k| (from..self.header.len()).map(|c| self.float(k, c)).collect()).collect()
    }
}

/// Long `t,site,value` table back to one row per snapshot.
fn read_site_series(path: &Path, times: &[f64], extra: Option<&str>) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let tab = Table::read(path)?;
    let (ct, cs, cv) = (tab.column("t")?, tab.column("site")?, tab.column("value")?);
    let ce = extra.map(|e| tab.column(e)).transpose()?;
    let mut main: Vec<Vec<f64>> = vec![Vec::new(); times.len()];
    let mut other: Vec<Vec<f64>> = vec![Vec::new(); times.len()];
    let mut k = 0;
    for row in 0..tab.rows.len() {
        let t = tab.float(row, ct)?;
        while k < times.len() && times[k] != t {
            k += 1;
        }
        if k == times.len() {
            return Err(tab.err(format!("row {}: time {t} is not a snapshot time", row + 1)));
        }
        let site: usize = tab.rows[row][cs].parse().map_err(|_| tab.err(format!("row {}: bad site", row + 1)))?;
        if site != main[k].len() + 1 {
            return Err(tab.err(format!("row {}: sites out of order", row + 1)));
        }
        main[k].push(tab.float(row, cv)?);
        if let Some(c) = ce {
            other[k].push(tab.float(row, c)?);
        }
    }
    Ok((main, other))
}

/// Reloads a directory written by [`write_run`].
pub fn load_run(dir: &Path) -> Result<RunResult> {
    let manifest: Manifest = serde_json::from_reader(File::open(dir.join(MANIFEST_FILE))?)?;
    let info: RunInfo = serde_json::from_reader(File::open(dir.join(RUN_INFO_FILE))?)?;

    let tab = Table::read(&dir.join(TRAJECTORY_FILE))?;
    let n = tab.header.iter().filter(|h| h.starts_with("theta_")).count();
    let amps = tab.header.iter().any(|h| h.starts_with("r_"));
    let rows = tab.numeric_rows(1)?;
    let phases: Vec<f64> = rows.iter().flat_map(|r| r[..n].iter().copied()).collect();
    let amplitudes = amps.then(|| rows.iter().flat_map(|r| r[n..].iter().copied()).collect());
    let trajectory = PhaseTrajectory::from_rows(
        info.trajectory_t0,
        info.trajectory_dt,
        n,
        phases,
        amplitudes,
        info.trajectory_meta,
    )?;

    let kind = match manifest.scenario.run.model {
        ChainModel::Ising => SpectrumKind::Majorana,
        ChainModel::Xx => SpectrumKind::Xx,
    };
    let tab = Table::read(&dir.join(SPECTRA_FILE))?;
    let mut times = Vec::with_capacity(tab.rows.len());
    let mut spectra = Vec::with_capacity(tab.rows.len());
    for (k, e) in tab.numeric_rows(1)?.into_iter().enumerate() {
        let t = tab.float(k, 0)?;
        times.push(t);
        spectra.push(SpectrumSnapshot { t, kind, energies: e });
    }

    let tab = Table::read(&dir.join(DIAGNOSTICS_FILE))?;
    if tab.rows.len() != times.len() {
        return Err(tab.err("snapshot count differs from spectra.csv"));
    }
    let col = |name| tab.column(name);
    let (cr, ce, ci, cx, cv) =
        (col("order_parameter")?, col("energy")?, col("ipr")?, col("center_of_mass")?, col("variance")?);
    let mut order = Vec::new();
    let mut energy = Vec::new();
    let mut metrics = Vec::new();
    for k in 0..tab.rows.len() {
        order.extend(tab.opt_float(k, cr)?);
        energy.extend(tab.opt_float(k, ce)?);
        if let (Some(ipr), Some(x), Some(var)) = (tab.opt_float(k, ci)?, tab.opt_float(k, cx)?, tab.opt_float(k, cv)?) {
            metrics.push(DensityMetrics { ipr, center_of_mass: x, variance: var });
        }
    }

    let (sigma_z, sigma_z_deviation) = if dir.join(SIGMA_Z_FILE).exists() {
        read_site_series(&dir.join(SIGMA_Z_FILE), &times, Some("deviation"))?
    } else {
        (Vec::new(), Vec::new())
    };
    let density = match info.observable {
        ObservableColumn::Density => read_site_series(&dir.join(OBSERVABLES_FILE), &times, None)?.0,
        ObservableColumn::SigmaZ => Vec::new(),
    };
    let source = manifest.observable_source;
    let observables = Observables { source, sigma_z, sigma_z_deviation, density, metrics, energy };
    let diagnostics = Diagnostics {
        order_parameter: order,
        sync_onset: info.sync_onset,
        wave_onset: info.wave_onset,
        wave: info.wave,
        defect: info.defect,
        final_defect: info.final_defect,
        max_norm_defect: info.max_norm_defect,
        initial: info.initial,
    };
    Ok(RunResult { times, trajectory, spectra, observables, diagnostics, manifest })
}

/// Plain-text matrix snapshot: `kind`, `n`, `t` header lines, then row-major entries.
pub fn write_matrix_snapshot(mut w: impl Write, kind: &str, t: f64, m: &DMatrix<f64>) -> Result<()> {
    writeln!(w, "kind {kind}")?;
    if m.nrows() == m.ncols() {
        writeln!(w, "n {}", m.nrows())?;
    } else {
        writeln!(w, "n {} {}", m.nrows(), m.ncols())?;
    }
    writeln!(w, "t {}", fmt_float(t))?;
    for i in 0..m.nrows() {
        let row: Vec<String> = m.row(i).iter().map(|&x| fmt_float(x)).collect();
        writeln!(w, "{}", row.join(" "))?;
    }
    Ok(())
}

/// Parses [`write_matrix_snapshot`] output back into `(kind, t, matrix)`.
pub fn read_matrix_snapshot(text: &str) -> Result<(String, f64, DMatrix<f64>)> {
    let bad = |msg: &str| Error::Format { file: "matrix snapshot".into(), msg: msg.into() };
    let mut lines = text.lines();
    let mut field = |key: &str| -> Result<String> {
        let line = lines.next().ok_or_else(|| bad("truncated header"))?;
        line.strip_prefix(key)
            .and_then(|r| r.strip_prefix(' '))
            .map(str::to_string)
            .ok_or_else(|| bad(&format!("expected `{key}` line")))
    };
    let kind = field("kind")?;
    let dims: Vec<usize> =
        field("n")?.split_whitespace().map(|s| s.parse().map_err(|_| bad("bad dimension"))).collect::<Result<_>>()?;
    let (rows, cols) = match dims[..] {
        [n] => (n, n),
        [r, c] => (r, c),
        _ => return Err(bad("bad dimension line")),
    };
    let t: f64 = field("t")?.parse().map_err(|_| bad("bad time"))?;
    let values: Vec<f64> = lines
        .flat_map(str::split_whitespace)
        .map(|s| s.parse().map_err(|_| bad("bad entry")))
        .collect::<Result<_>>()?;
    if values.len() != rows * cols {
        return Err(bad("entry count does not match dimensions"));
    }
    Ok((kind, t, DMatrix::from_row_slice(rows, cols, &values)))
}

/// Site-resolved eigenvector weights `|v_i|²` as `t,state,energy,site,weight`.
pub fn write_eigenstates_csv(path: &Path, snaps: &[EigenSnapshot]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["t", "state", "energy", "site", "weight"])?;
    for s in snaps {
        for (c, e) in s.energies.iter().enumerate() {
            for site in 0..s.densities.nrows() {
                w.write_record([
                    fmt_float(s.t),
                    c.to_string(),
                    fmt_float(*e),
                    (site + 1).to_string(),
                    fmt_float(s.densities[(site, c)]),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// One row of `ensemble_summary.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub seed: u64,
    /// Grid coordinates as `(dotted key, value)`, in sweep order.
    pub grid: Vec<(String, f64)>,
    pub onset: Option<f64>,
    pub band_count: Option<usize>,
    pub pump_rate: Option<f64>,
    pub exponent: Option<f64>,
}

impl SummaryRow {
    pub fn new(m: &MetricReport, times: &[f64], grid: Vec<(String, f64)>) -> Self {
        SummaryRow {
            seed: m.seed,
            grid,
            onset: m.sync_onset,
            band_count: m.post_onset_band_count(times),
            pump_rate: m.pump_rate,
            exponent: m.spreading_fit.map(|f| f.exponent),
        }
    }
}

pub fn write_ensemble_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let keys: Vec<String> = rows.first().map(|r| r.grid.iter().map(|g| g.0.clone()).collect()).unwrap_or_default();
    let mut header = vec!["seed".to_string()];
    header.extend(keys.iter().cloned());
    header.extend(["onset", "band_count", "pump_rate", "exponent"].map(String::from));
    w.write_record(&header)?;
    for r in rows {
        if r.grid.len() != keys.len() || r.grid.iter().zip(&keys).any(|(g, k)| &g.0 != k) {
            return Err(Error::invalid("summary rows have differing grid keys"));
        }
        let mut rec = vec![r.seed.to_string()];
        rec.extend(r.grid.iter().map(|g| fmt_float(g.1)));
        rec.push(fmt_opt(r.onset));
        rec.push(r.band_count.map(|b| b.to_string()).unwrap_or_default());
        rec.push(fmt_opt(r.pump_rate));
        rec.push(fmt_opt(r.exponent));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
