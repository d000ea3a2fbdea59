use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::drive::{make_drive, Drive};
use super::scenario::{integer_ratio, Evolution, InitialSelector, Scenario};
use crate::error::{Error, Result, Stage};
use crate::fermion::generator::C64;
use crate::fermion::spectrum::majorana_eigenvectors;
use crate::fermion::{
    build_generator, covariance_from_occupations, density_metrics_from_weights, eigenmode_decomposition,
    evolve_covariance, instantaneous_spectrum, localized_eigenstate, mode_pair_density, sigma_z_profile, state_energy,
    xx_spectrum, CovarianceMatrix, DefectStats, DensityMetrics, Generator, PropagatorKind, PropagatorMatrix,
    PropagatorStepper, Selector, SpectrumKind, SpectrumSnapshot,
};
use crate::oscillator::{
    detect_sync_onset, detect_wave_onset, integrate, order_parameter, wave_profile, PhaseTrajectory, WaveProfile,
};

/// Order-parameter level that must hold to the end of the run to count as synchronized.
pub const SYNC_THRESHOLD: f64 = 0.99;
/// Circular std of neighbour phase differences below which a travelling wave has formed.
pub const WAVE_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservableSource {
    Covariance,
    Wavefunction,
}

/// Per-snapshot observables; every non-empty series has one entry per snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct Observables {
    pub source: ObservableSource,
    /// Raw `⟨σ^z_j(t)⟩` (Ising only).
    pub sigma_z: Vec<Vec<f64>>,
    /// `⟨σ^z_j(t)⟩ − ⟨σ^z_j(0)⟩` (Ising only).
    pub sigma_z_deviation: Vec<Vec<f64>>,
    /// Site density of the tracked excitation: the occupied quasiparticle
    /// (Ising) or `|ψ_j|²` (XX). Empty for the Ising ground state.
    pub density: Vec<Vec<f64>>,
    pub metrics: Vec<DensityMetrics>,
    /// `⟨H(t)⟩` with the instantaneous generator.
    pub energy: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialInfo {
    /// Mode (Ising) or eigenstate (XX) index, ascending energy, 0-based.
    pub index: Option<usize>,
    pub energy: f64,
    pub ipr: Option<f64>,
    pub weakly_localized: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    /// `r(t)` on the snapshot grid.
    pub order_parameter: Vec<f64>,
    pub sync_onset: Option<f64>,
    pub wave_onset: Option<f64>,
    /// Travelling-wave profile over `[wave_onset, t_end]`.
    pub wave: Option<WaveProfile>,
    pub defect: DefectStats,
    /// Defect of the evolved matrix at the end of the run.
    pub final_defect: f64,
    /// Largest `|Σ_j density_j − 1|` over the snapshots.
    pub max_norm_defect: f64,
    pub initial: InitialInfo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSettings {
    pub sync_threshold: f64,
    pub wave_tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub preset: Option<String>,
    pub overrides: Vec<String>,
    pub scenario: Scenario,
    pub units: String,
    pub conventions: Vec<String>,
    pub observable_source: ObservableSource,
    pub analysis: AnalysisSettings,
}

impl Manifest {
    pub fn new(scenario: &Scenario, source: ObservableSource) -> Self {
        Manifest {
            tool: "kchain".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            preset: None,
            overrides: Vec::new(),
            scenario: scenario.clone(),
            units: "energies and rates in units of J, times in units of 1/J, hbar = 1".into(),
            conventions: vec![
                "Majorana operators a_{2j-1} = f_j^+ + f_j, a_{2j} = i(f_j^+ - f_j), {a_m, a_n} = 2 delta_mn".into(),
                "covariance Gamma_mn = (i/2) <[a_m, a_n]>, <sigma^z_j> = -Gamma_{2j-1,2j}".into(),
                "Ising spectra are eigenvalues of i*M with da/dt = M a; XX spectra are eigenvalues of h with i dpsi/dt = h psi".into(),
                "Ising energy <H> = (1/2) sum_mn M_mn Gamma_mn".into(),
                "site indices are 1-based in all outputs".into(),
            ],
            observable_source: source,
            analysis: AnalysisSettings { sync_threshold: SYNC_THRESHOLD, wave_tolerance: WAVE_TOLERANCE },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub times: Vec<f64>,
    /// Classical trajectory on the snapshot grid.
    pub trajectory: PhaseTrajectory,
    pub spectra: Vec<SpectrumSnapshot>,
    pub observables: Observables,
    pub diagnostics: Diagnostics,
    pub manifest: Manifest,
}

impl RunResult {
    pub fn scenario(&self) -> &Scenario {
        &self.manifest.scenario
    }
}

/// Classical stage shared by [`run_scenario`] and [`eigenstate_snapshots`].
pub fn classical_trajectory(s: &Scenario) -> Result<PhaseTrajectory> {
    let n = s.chain.n;
    let net = s.network.build(n, s.run.seed)?;
    let init = s.network.initial_state(n, s.run.seed);
    let mut traj = integrate(&net, &init, s.run.classical_dt, s.run.t_end, s.network.drive_model())?;
    traj.meta.seed = Some(s.run.seed);
    Ok(traj)
}

fn generator_at(s: &Scenario, drive: &Drive<'_>, t: f64) -> Result<Generator> {
    build_generator(&s.chain, &drive.at(t)?)
}

enum Prepared {
    Covariance { gamma0: CovarianceMatrix, carrier: Option<DMatrix<f64>> },
    Wavefunction { psi0: DVector<C64> },
}

fn prepare(s: &Scenario, gen0: &Generator) -> Result<(Prepared, InitialInfo)> {
    match gen0 {
        Generator::Majorana(m) => {
            let modes = eigenmode_decomposition(m)?;
            let n = modes.n_modes();
            let chosen = match s.run.initial_state {
                InitialSelector::Ground => None,
                InitialSelector::QuasiparticleMaxIpr => {
                    let ipr = |k: usize| modes.mode_density(k).iter().map(|p| p * p).sum::<f64>();
                    (0..n).max_by(|&a, &b| ipr(a).total_cmp(&ipr(b)))
                }
                InitialSelector::Quasiparticle { mode } => {
                    if mode >= n {
                        return Err(Error::invalid(format!("mode {mode} outside 0..{n}")));
                    }
                    Some(mode)
                }
                other => return Err(Error::invalid(format!("{other:?} needs the XX model"))),
            };
            let mut occ = vec![false; n];
            if let Some(k) = chosen {
                occ[k] = true;
            }
            let gamma0 = covariance_from_occupations(&modes, &occ)?;
            let carrier = chosen.map(|k| modes.w.columns(2 * k, 2).into_owned());
            let ipr = chosen.map(|k| modes.mode_density(k).iter().map(|p| p * p).sum::<f64>());
            let info = InitialInfo {
                index: chosen,
                energy: state_energy(&m.matrix(), &gamma0),
                ipr,
                weakly_localized: ipr.is_some_and(|p| p * (n as f64) < 2.0),
            };
            Ok((Prepared::Covariance { gamma0, carrier }, info))
        }
        Generator::Xx(h) => {
            let selector = match s.run.initial_state {
                InitialSelector::MaxIpr => Selector::MaxIpr,
                InitialSelector::Site { site } => Selector::Site { site },
                InitialSelector::MaxIprInRegion { first, last, min_weight } => {
                    Selector::MaxIprInRegion { first, last, min_weight }
                }
                other => return Err(Error::invalid(format!("{other:?} needs the Ising model"))),
            };
            let (psi, loc) = localized_eigenstate(h, selector)?;
            let info = InitialInfo {
                index: Some(loc.index),
                energy: loc.energy,
                ipr: Some(loc.ipr),
                weakly_localized: loc.weakly_localized,
            };
            Ok((Prepared::Wavefunction { psi0: psi.psi }, info))
        }
    }
}

fn xx_energy(h: &DMatrix<f64>, psi: &DVector<C64>) -> f64 {
    let hc = h.map(|x| C64::new(x, 0.0));
    psi.dotc(&(hc * psi)).re
}

/// Runs the classical network, then the driven chain, recording snapshots.
pub fn run_scenario(s: &Scenario) -> Result<RunResult> {
    s.validate()?;
    let full = classical_trajectory(s).map_err(|e| e.at(Stage::Classical))?;
    let drive = make_drive(&full, s.chain.g_amp).map_err(|e| e.at(Stage::Drive))?;
    let times = s.snapshot_times();

    let gen0 = generator_at(s, &drive, 0.0).map_err(|e| e.at(Stage::Preparation))?;
    let (prepared, initial) = prepare(s, &gen0).map_err(|e| e.at(Stage::Preparation))?;

    let source = match prepared {
        Prepared::Covariance { .. } => ObservableSource::Covariance,
        Prepared::Wavefunction { .. } => ObservableSource::Wavefunction,
    };
    let mut stepper = match (&prepared, s.run.evolution) {
        (Prepared::Wavefunction { psi0 }, Evolution::State) => PropagatorStepper::from_matrix(
            PropagatorMatrix::Complex(DMatrix::from_column_slice(psi0.len(), 1, psi0.as_slice())),
            0.0,
        ),
        (Prepared::Wavefunction { .. }, Evolution::Propagator) => {
            PropagatorStepper::new(PropagatorKind::XxUnitary, gen0.dim(), 0.0)
        }
        (Prepared::Covariance { .. }, _) => PropagatorStepper::new(PropagatorKind::MajoranaOrthogonal, gen0.dim(), 0.0),
    };

    let mut obs = Observables {
        source,
        sigma_z: Vec::new(),
        sigma_z_deviation: Vec::new(),
        density: Vec::new(),
        metrics: Vec::new(),
        energy: Vec::new(),
    };
    let mut spectra = Vec::with_capacity(times.len());
    let mut max_norm_defect: f64 = 0.0;
    let mut gen_at = |t: f64| generator_at(s, &drive, t);

    for (k, &t) in times.iter().enumerate() {
        if k > 0 {
            stepper.advance_to(&mut gen_at, t, s.run.quantum_dt).map_err(|e| e.at(Stage::Quantum))?;
        }
        let gen = gen_at(t).map_err(|e| e.at(Stage::Quantum))?;
        spectra.push(instantaneous_spectrum(&gen).map_err(|e| e.at(Stage::Quantum))?);
        let prop = stepper.propagator();
        let density = match &prepared {
            Prepared::Covariance { gamma0, carrier } => {
                let gamma = evolve_covariance(gamma0, prop).map_err(|e| e.at(Stage::Quantum))?;
                let sz = sigma_z_profile(&gamma);
                let dev = match obs.sigma_z.first() {
                    Some(first) => sz.iter().zip(first).map(|(a, b)| a - b).collect(),
                    None => vec![0.0; sz.len()],
                };
                obs.energy.push(state_energy(&gen.matrix(), &gamma));
                obs.sigma_z.push(sz);
                obs.sigma_z_deviation.push(dev);
                carrier.as_ref().map(|w| {
                    let o = prop.real().expect("Majorana propagator");
                    let uv = o * w;
                    let u: Vec<f64> = uv.column(0).iter().copied().collect();
                    let v: Vec<f64> = uv.column(1).iter().copied().collect();
                    mode_pair_density(&u, &v)
                })
            }
            Prepared::Wavefunction { psi0 } => {
                let m = prop.complex().expect("XX propagator");
                let psi: DVector<C64> = if m.ncols() == 1 { m.column(0).into_owned() } else { m * psi0 };
                obs.energy.push(xx_energy(&gen.matrix(), &psi));
                Some(psi.iter().map(|z| z.norm_sqr()).collect())
            }
        };
        if let Some(d) = density {
            max_norm_defect = max_norm_defect.max((d.iter().sum::<f64>() - 1.0).abs());
            obs.metrics.push(density_metrics_from_weights(&d));
            obs.density.push(d);
        }
    }

    let defect = stepper.propagator().stats;
    let final_defect = stepper.propagator().defect();
    let stride = integer_ratio(s.run.snapshot_every, s.run.classical_dt).unwrap_or(1);
    let trajectory = full.decimate(stride);
    let order = (0..trajectory.len())
        .map(|k| order_parameter(trajectory.row(k)).map(|(r, _)| r))
        .collect::<Result<Vec<f64>>>()
        .map_err(|e| e.at(Stage::Diagnostics))?;
    let sync_onset = detect_sync_onset(&full, SYNC_THRESHOLD);
    let wave_onset = detect_wave_onset(&full, WAVE_TOLERANCE);
    let wave = wave_onset.and_then(|t0| wave_profile(&full, (t0, full.end())).ok());

    Ok(RunResult {
        times,
        trajectory,
        spectra,
        observables: obs,
        diagnostics: Diagnostics {
            order_parameter: order,
            sync_onset,
            wave_onset,
            wave,
            defect,
            final_defect,
            max_norm_defect,
            initial,
        },
        manifest: Manifest::new(s, source),
    })
}

/// Full eigensystem of the instantaneous generator at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSnapshot {
    pub t: f64,
    pub kind: SpectrumKind,
    /// Ascending.
    pub energies: Vec<f64>,
    /// `densities[(j, c)]`: weight of eigenvector `c` on site `j`; columns sum to one.
    pub densities: DMatrix<f64>,
}

impl EigenSnapshot {
    pub fn iprs(&self) -> Vec<f64> {
        self.densities.column_iter().map(|c| c.iter().map(|p| p * p).sum()).collect()
    }

    pub fn mean_ipr(&self) -> f64 {
        let v = self.iprs();
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Eigenvectors of the Majorana or XX generator, reduced to site densities.
pub fn eigensystem(gen: &Generator) -> Result<EigenSnapshot> {
    match gen {
        Generator::Majorana(m) => {
            let (energies, v) = majorana_eigenvectors(m)?;
            let n = m.n();
            let densities =
                DMatrix::from_fn(n, v.ncols(), |j, c| v[(2 * j, c)].norm_sqr() + v[(2 * j + 1, c)].norm_sqr());
            Ok(EigenSnapshot { t: m.t, kind: SpectrumKind::Majorana, energies, densities })
        }
        Generator::Xx(h) => {
            let (energies, v) = crate::fermion::spectrum::symmetric_eigen(&h.matrix(), "XX eigenvectors")?;
            debug_assert_eq!(energies, xx_spectrum(h)?);
            Ok(EigenSnapshot { t: h.t, kind: SpectrumKind::Xx, energies, densities: v.map(|x| x * x) })
        }
    }
}

/// Eigensystems of the driven generator at the requested times.
pub fn eigenstate_snapshots(s: &Scenario, times: &[f64]) -> Result<Vec<EigenSnapshot>> {
    s.validate()?;
    if let Some(&t) = times.iter().find(|&&t| !(0.0..=s.run.t_end).contains(&t)) {
        return Err(Error::OutOfRange { t, start: 0.0, end: s.run.t_end });
    }
    let traj = classical_trajectory(s).map_err(|e| e.at(Stage::Classical))?;
    let drive = make_drive(&traj, s.chain.g_amp).map_err(|e| e.at(Stage::Drive))?;
    times
        .iter()
        .map(|&t| generator_at(s, &drive, t).and_then(|g| eigensystem(&g)))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.at(Stage::Diagnostics))
}
