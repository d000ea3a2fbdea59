//! `kchain`: run, sweep and plot Kuramoto-driven spin-chain simulations.

mod config;
mod plot;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kchain_core::cosim::{run_scenario, Manifest, RunResult, Scenario};
use kchain_core::experiments::{compute_metrics, MetricReport};
use kchain_core::io::{self, fmt_float, SummaryRow};
use rayon::prelude::*;

use config::{load_file, ConfigError, RunConfig};
use plot::Heatmap;

#[derive(Parser)]
#[command(name = "kchain", version, about = "Kuramoto networks driving free-fermion spin chains")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario for one or more seeds.
    Simulate(SimulateArgs),
    /// Run a seed range and/or parameter grid in parallel.
    Sweep(SweepArgs),
    /// Write plot-ready tables and SVG heatmaps for a finished run.
    Plotdata(PlotArgs),
    /// Print a preset as a TOML config file.
    Config {
        #[arg(long)]
        preset: String,
    },
}

#[derive(Args)]
struct Source {
    /// Built-in scenario: fig2 or fig3.
    #[arg(long, conflicts_with_all = ["config", "manifest"])]
    preset: Option<String>,
    /// TOML file with `network`, `chain` and `run` sections (optionally `preset = ...`).
    #[arg(long, conflicts_with = "manifest")]
    config: Option<PathBuf>,
    /// Re-run the scenario stored in a run's manifest.json.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Dotted-key override, e.g. `network.k1=0.3`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Snapshot cadence (units of 1/J); shorthand for `--set run.snapshot_every=...`.
    #[arg(long)]
    snapshot_every: Option<f64>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    source: Source,
    /// Seed(s) to run; defaults to the config's seeds or `run.seed`.
    #[arg(long)]
    seed: Vec<u64>,
    /// Output directory (one subdirectory per seed when several are run).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    source: Source,
    /// Inclusive seed range `a..b` (or a single seed).
    #[arg(long)]
    seeds: Option<String>,
    /// Parameter scan `key=start:step:end` (inclusive). Repeatable; points form a product.
    #[arg(long, value_name = "KEY=START:STEP:END")]
    grid: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    /// Directory written by `simulate`.
    run_dir: PathBuf,
    /// Destination (default: RUN_DIR/plots).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("{0}")]
    Usage(String),

    #[error("seed {seed}: {source}")]
    Run {
        seed: u64,
        #[source]
        source: kchain_core::Error,
    },

    #[error("{0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => 2,
            CliError::Run { .. } => 3,
            CliError::Io(_) => 1,
        }
    }
}

fn io_err(what: impl std::fmt::Display) -> impl FnOnce(kchain_core::Error) -> CliError {
    move |e| CliError::Io(format!("{what}: {e}"))
}

fn resolve(src: &Source) -> Result<RunConfig, CliError> {
    let base = match (&src.preset, &src.config, &src.manifest) {
        (Some(p), _, _) => RunConfig::from_preset(p)?,
        (None, Some(path), _) => load_file(path)?,
        (None, None, Some(path)) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            let m: Manifest = serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("{}:{}:{}: {e}", path.display(), e.line(), e.column())))?;
            RunConfig { preset: m.preset, scenario: m.scenario, overrides: m.overrides, seeds: Vec::new(), out: None }
        }
        (None, None, None) => {
            return Err(CliError::Usage("one of --preset, --config or --manifest is required".into()))
        }
    };
    let mut sets = src.set.clone();
    if let Some(dt) = src.snapshot_every {
        sets.push(format!("run.snapshot_every={dt:?}"));
    }
    Ok(base.with_overrides(&sets)?)
}

fn validate(s: &Scenario) -> Result<(), CliError> {
    s.validate().map_err(|e| CliError::Config(ConfigError::Invalid(format!("invalid scenario: {e}"))))
}

struct Job {
    scenario: Scenario,
    preset: Option<String>,
    overrides: Vec<String>,
    grid: Vec<(String, f64)>,
    dir: PathBuf,
}

struct Done {
    result: RunResult,
    metrics: MetricReport,
    grid: Vec<(String, f64)>,
    dir: PathBuf,
}

fn execute(job: Job) -> Result<Done, CliError> {
    let seed = job.scenario.run.seed;
    let mut result = run_scenario(&job.scenario).map_err(|source| CliError::Run { seed, source })?;
    result.manifest.preset = job.preset;
    result.manifest.overrides = job.overrides;
    let metrics = compute_metrics(&result);
    io::write_run(&job.dir, &result, &metrics).map_err(io_err(job.dir.display()))?;
    Ok(Done { result, metrics, grid: job.grid, dir: job.dir })
}

fn pool() -> Result<rayon::ThreadPool, CliError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("KCHAIN_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Usage(format!("KCHAIN_THREADS must be a positive integer, got {v:?}")))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| CliError::Io(format!("thread pool: {e}")))
}

/// Runs all jobs in the worker pool; results come back in job order.
fn run_all(jobs: Vec<Job>) -> Result<Vec<Done>, CliError> {
    let results: Vec<Result<Done, CliError>> = pool()?.install(|| jobs.into_par_iter().map(execute).collect());
    results.into_iter().collect()
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "none".to_string(), |v| format!("{v:.4}"))
}

fn summary_line(d: &Done) -> String {
    let m = &d.metrics;
    let bands = m.post_onset_band_count(&d.result.times).map_or_else(|| "none".to_string(), |b| b.to_string());
    let mut line = format!("seed {}", m.seed);
    for (k, v) in &d.grid {
        line.push_str(&format!(" {k}={v}"));
    }
    line.push_str(&format!(
        ": onset {}, band_count {bands}, pump_rate {} -> {}",
        opt(m.sync_onset),
        opt(m.pump_rate),
        d.dir.display()
    ));
    line
}

fn default_out(cfg: &RunConfig) -> PathBuf {
    cfg.out.clone().unwrap_or_else(|| Path::new("runs").join(&cfg.scenario.name))
}

fn with_seed(s: &Scenario, seed: u64) -> Scenario {
    let mut s = s.clone();
    s.run.seed = seed;
    s
}

fn simulate(args: SimulateArgs) -> Result<(), CliError> {
    let cfg = resolve(&args.source)?;
    let seeds = if !args.seed.is_empty() {
        args.seed.clone()
    } else if !cfg.seeds.is_empty() {
        cfg.seeds.clone()
    } else {
        vec![cfg.scenario.run.seed]
    };
    let out = args.out.clone().unwrap_or_else(|| default_out(&cfg));
    let mut jobs = Vec::new();
    for &seed in &seeds {
        let scenario = with_seed(&cfg.scenario, seed);
        validate(&scenario)?;
        let dir = if seeds.len() == 1 { out.clone() } else { out.join(format!("seed_{seed}")) };
        jobs.push(Job {
            scenario,
            preset: cfg.preset.clone(),
            overrides: cfg.overrides.clone(),
            grid: Vec::new(),
            dir,
        });
    }
    for d in run_all(jobs)? {
        println!("{}", summary_line(&d));
    }
    Ok(())
}

fn parse_seeds(s: &str) -> Result<Vec<u64>, CliError> {
    let bad = || CliError::Usage(format!("bad seed range {s:?} (expected a..b)"));
    let (a, b) = match s.split_once("..") {
        Some((a, b)) => (a.trim(), b.trim().trim_start_matches('=')),
        None => (s.trim(), s.trim()),
    };
    let a: u64 = a.parse().map_err(|_| bad())?;
    let b: u64 = b.parse().map_err(|_| bad())?;
    if b < a {
        return Err(CliError::Usage(format!("empty seed range {s:?}")));
    }
    Ok((a..=b).collect())
}

/// Values of `key=start:step:end`, endpoints included.
fn parse_grid(spec: &str) -> Result<(String, Vec<f64>), CliError> {
    let bad = |msg: &str| CliError::Usage(format!("bad grid {spec:?}: {msg}"));
    let (key, range) = spec.split_once('=').ok_or_else(|| bad("expected key=start:step:end"))?;
    let parts: Vec<f64> = range
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad("non-numeric bound")))
        .collect::<Result<_, _>>()?;
    let [start, step, end] = parts[..] else {
        return Err(bad("expected three numbers"));
    };
    if !(step > 0.0) || !start.is_finite() || !end.is_finite() || end < start {
        return Err(bad("need step > 0 and end >= start"));
    }
    let count = ((end - start) / step + 1e-9).floor() as usize;
    let values = (0..=count)
        .map(|i| {
            // Trim accumulated rounding so 0.1 + 2 * 0.1 is written as 0.3.
            let v = start + i as f64 * step;
            format!("{v:.12e}").parse::<f64>().expect("formatted float parses")
        })
        .collect();
    Ok((key.trim().to_string(), values))
}

fn grid_points(axes: &[(String, Vec<f64>)]) -> Vec<Vec<(String, f64)>> {
    let mut points = vec![Vec::new()];
    for (key, values) in axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push((key.clone(), *v));
                    q
                })
            })
            .collect();
    }
    points
}

fn sweep(args: SweepArgs) -> Result<(), CliError> {
    let cfg = resolve(&args.source)?;
    let seeds = match &args.seeds {
        Some(s) => parse_seeds(s)?,
        None if !cfg.seeds.is_empty() => cfg.seeds.clone(),
        None => vec![cfg.scenario.run.seed],
    };
    let axes = args.grid.iter().map(|g| parse_grid(g)).collect::<Result<Vec<_>, _>>()?;
    let points = grid_points(&axes);
    let out = args.out.clone().unwrap_or_else(|| default_out(&cfg));

    let mut jobs = Vec::new();
    for &seed in &seeds {
        for point in &points {
            let sets: Vec<String> = point.iter().map(|(k, v)| format!("{k}={v:?}")).collect();
            let c = cfg.clone().with_overrides(&sets)?;
            let scenario = with_seed(&c.scenario, seed);
            validate(&scenario)?;
            let mut dir = out.join(format!("seed_{seed}"));
            if !point.is_empty() {
                let label: Vec<String> = point.iter().map(|(k, v)| format!("{k}={v}")).collect();
                dir = dir.join(label.join(","));
            }
            jobs.push(Job { scenario, preset: c.preset, overrides: c.overrides, grid: point.clone(), dir });
        }
    }
    let done = run_all(jobs)?;
    let rows: Vec<SummaryRow> =
        done.iter().map(|d| SummaryRow::new(&d.metrics, &d.result.times, d.grid.clone())).collect();
    for d in &done {
        println!("{}", summary_line(d));
    }
    let path = out.join(io::SUMMARY_FILE);
    io::write_ensemble_summary(&path, &rows).map_err(io_err(path.display()))?;
    println!("summary -> {}", path.display());
    Ok(())
}

fn write_long(path: &Path, index: &str, times: &[f64], cols: &[Vec<f64>]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut rows = vec![vec!["t".to_string(), index.to_string(), "value".to_string()]];
    for (t, col) in times.iter().zip(cols) {
        for (i, v) in col.iter().enumerate() {
            rows.push(vec![fmt_float(*t), (i + 1).to_string(), fmt_float(*v)]);
        }
    }
    for r in rows {
        w.write_record(&r).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    }
    w.flush().map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn plotdata(args: PlotArgs) -> Result<(), CliError> {
    let dir = &args.run_dir;
    if !dir.join(io::MANIFEST_FILE).is_file() {
        return Err(CliError::Usage(format!("{} is not a run directory (no {})", dir.display(), io::MANIFEST_FILE)));
    }
    let r = io::load_run(dir).map_err(|e| CliError::Usage(format!("cannot read run {}: {e}", dir.display())))?;
    let out = args.out.clone().unwrap_or_else(|| dir.join("plots"));
    fs::create_dir_all(&out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;

    let g = r.scenario().chain.g_amp;
    let traj = &r.trajectory;
    let fields: Vec<Vec<f64>> = (0..traj.len()).map(|k| traj.row(k).iter().map(|th| g * th.cos()).collect()).collect();
    let field_times: Vec<f64> = traj.times().collect();
    let spectra: Vec<Vec<f64>> = r.spectra.iter().map(|s| s.energies.clone()).collect();
    let obs = &r.observables;
    let (observable, obs_title) =
        if obs.density.is_empty() { (&obs.sigma_z, "<sigma^z_j(t)>") } else { (&obs.density, "excitation density") };

    let panels: [(&str, &str, &str, &[f64], &[Vec<f64>]); 3] = [
        ("fields", "transverse field g_i(t) = G cos theta_i(t)", "site", &field_times, &fields),
        ("spectrum", "instantaneous spectrum", "level", &r.times, &spectra),
        ("observable", obs_title, "site", &r.times, observable),
    ];
    for (name, title, y_label, times, cols) in panels {
        write_long(&out.join(format!("{name}.csv")), y_label, times, cols)?;
        let svg = Heatmap { title, x_label: "t (1/J)", y_label, times, columns: cols }.render();
        let path = out.join(format!("{name}.svg"));
        fs::write(&path, svg).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    }
    println!("plots -> {}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Command::Simulate(a) => simulate(a),
        Command::Sweep(a) => sweep(a),
        Command::Plotdata(a) => plotdata(a),
        Command::Config { preset } => {
            RunConfig::from_preset(&preset).map(|c| print!("{}", config::render(&c.scenario))).map_err(Into::into)
        }
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Run { source, .. } = &e {
                if let Some(stage) = source.stage() {
                    eprintln!("failed stage: {stage}");
                }
            }
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_ranges() {
        assert_eq!(parse_seeds("1..20").unwrap().len(), 20);
        assert_eq!(parse_seeds("3..=4").unwrap(), vec![3, 4]);
        assert_eq!(parse_seeds("7").unwrap(), vec![7]);
        assert_eq!(parse_seeds("5..3").unwrap_err().exit_code(), 2);
        assert!(parse_seeds("a..b").is_err());
    }

    #[test]
    fn grid_ranges() {
        let (k, v) = parse_grid("network.k_tilde=0.1:0.1:1.0").unwrap();
        assert_eq!(k, "network.k_tilde");
        assert_eq!(v.len(), 10);
        assert_eq!(v[2], 0.3);
        assert_eq!(v[9], 1.0);
        assert!(parse_grid("x=1:0:2").is_err());
        assert!(parse_grid("x=2:1:1").is_err());
        let pts = grid_points(&[("a".into(), vec![1.0, 2.0]), ("b".into(), vec![5.0, 6.0, 7.0])]);
        assert_eq!(pts.len(), 6);
        assert_eq!(pts[1], vec![("a".to_string(), 1.0), ("b".to_string(), 6.0)]);
    }
}
