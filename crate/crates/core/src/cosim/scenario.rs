use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fermion::ChainParams;
use crate::oscillator::{
    build_all_to_all, build_zigzag_with_delay_sign, random_initial_phases, DriveModel, FrequencySpec, InitialState,
    NetworkSpec, SLState,
};

/// Oscillator network description; the oscillator count is the chain length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "topology", rename_all = "snake_case", deny_unknown_fields)]
pub enum NetworkConfig {
    AllToAll {
        k_tilde: f64,
        omega: f64,
        /// Spread of natural frequencies around `omega` (0 = identical).
        #[serde(default)]
        omega_std: f64,
        #[serde(default)]
        drive: DriveModel,
    },
    Zigzag {
        k1: f64,
        k2: f64,
        /// Sign of the phase delay `β_{i,i+r} = sign · 2rπ/3`.
        #[serde(default = "minus_one")]
        delay_sign: f64,
        omega: f64,
        #[serde(default)]
        omega_std: f64,
        #[serde(default)]
        drive: DriveModel,
    },
}

fn minus_one() -> f64 {
    -1.0
}

/// Offset mixed into the run seed for the frequency draw, so phases and
/// frequencies come from independent streams.
const FREQUENCY_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

impl NetworkConfig {
    pub fn drive_model(&self) -> DriveModel {
        match self {
            NetworkConfig::AllToAll { drive, .. } | NetworkConfig::Zigzag { drive, .. } => *drive,
        }
    }

    pub fn omega(&self) -> f64 {
        match self {
            NetworkConfig::AllToAll { omega, .. } | NetworkConfig::Zigzag { omega, .. } => *omega,
        }
    }

    fn frequencies(&self, seed: u64) -> FrequencySpec {
        let (omega, std) = match self {
            NetworkConfig::AllToAll { omega, omega_std, .. } | NetworkConfig::Zigzag { omega, omega_std, .. } => {
                (*omega, *omega_std)
            }
        };
        if std == 0.0 {
            FrequencySpec::Uniform { value: omega }
        } else {
            FrequencySpec::Normal { mean: omega, std, seed: seed ^ FREQUENCY_STREAM }
        }
    }

    pub fn build(&self, n: usize, seed: u64) -> Result<NetworkSpec> {
        let net = match *self {
            NetworkConfig::AllToAll { k_tilde, omega, .. } => build_all_to_all(n, k_tilde, omega)?,
            NetworkConfig::Zigzag { k1, k2, delay_sign, omega, .. } => {
                if delay_sign != 1.0 && delay_sign != -1.0 {
                    return Err(Error::invalid(format!("delay_sign must be ±1, got {delay_sign}")));
                }
                build_zigzag_with_delay_sign(n, k1, k2, omega, delay_sign)?
            }
        };
        let freqs = self.frequencies(seed).sample(n)?;
        net.with_freqs(freqs)
    }

    /// Random phases (and limit-cycle amplitudes for Stuart-Landau) at `t = 0`.
    pub fn initial_state(&self, n: usize, seed: u64) -> InitialState {
        let phases = random_initial_phases(n, seed);
        match self.drive_model() {
            DriveModel::Kuramoto => InitialState::Phase(phases),
            DriveModel::StuartLandau { kappa1, kappa2 } => {
                let r0 = if kappa1 > 0.0 { (kappa1 / (2.0 * kappa2)).sqrt() } else { 1.0 };
                InitialState::StuartLandau(SLState {
                    t: phases.t,
                    r: nalgebra::DVector::from_element(n, r0),
                    theta: phases.theta,
                })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainModel {
    Ising,
    Xx,
}

/// Which quantum state is prepared from the `t = 0` generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSelector {
    /// Ising: quasiparticle vacuum of `H(0)`.
    Ground,
    /// Ising: vacuum plus the quasiparticle whose mode vector has the largest IPR.
    QuasiparticleMaxIpr,
    /// Ising: vacuum plus quasiparticle `mode` (ascending energy, 0-based).
    Quasiparticle { mode: usize },
    /// XX: single particle in the most localized eigenstate of `h(0)`.
    MaxIpr,
    /// XX: eigenstate with the largest weight on `site` (1-based).
    Site { site: usize },
    /// XX: most localized eigenstate with at least `min_weight` on sites `first..=last`.
    MaxIprInRegion { first: usize, last: usize, min_weight: f64 },
}

impl InitialSelector {
    fn model(&self) -> ChainModel {
        match self {
            InitialSelector::Ground | InitialSelector::QuasiparticleMaxIpr | InitialSelector::Quasiparticle { .. } => {
                ChainModel::Ising
            }
            _ => ChainModel::Xx,
        }
    }
}

/// What the quantum stage integrates.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Evolution {
    /// The full propagator matrix.
    #[default]
    Propagator,
    /// Only the prepared state vector (XX chain).
    State,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSettings {
    pub model: ChainModel,
    pub classical_dt: f64,
    pub quantum_dt: f64,
    pub t_end: f64,
    pub snapshot_every: f64,
    pub seed: u64,
    pub initial_state: InitialSelector,
    #[serde(default)]
    pub evolution: Evolution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub network: NetworkConfig,
    pub chain: ChainParams,
    pub run: RunSettings,
}

/// `a / b` as an integer when it is one up to rounding.
pub(crate) fn integer_ratio(a: f64, b: f64) -> Option<usize> {
    let r = a / b;
    let k = r.round();
    ((r - k).abs() <= 1e-9 * r.abs().max(1.0) && k >= 0.0).then_some(k as usize)
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.chain.validate()?;
        let r = &self.run;
        match r.model {
            ChainModel::Ising if self.chain.jy != 0.0 => {
                return Err(Error::invalid("the Ising model needs chain.jy = 0"))
            }
            ChainModel::Xx if self.chain.jx != self.chain.jy => {
                return Err(Error::invalid("the XX model needs chain.jx = chain.jy"))
            }
            _ => {}
        }
        for (name, v) in [
            ("classical_dt", r.classical_dt),
            ("quantum_dt", r.quantum_dt),
            ("t_end", r.t_end),
            ("snapshot_every", r.snapshot_every),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("run.{name} must be positive and finite, got {v}")));
            }
        }
        if r.quantum_dt > r.classical_dt {
            return Err(Error::invalid("run.quantum_dt must not exceed run.classical_dt"));
        }
        if integer_ratio(r.classical_dt, r.quantum_dt).is_none() {
            return Err(Error::invalid("run.classical_dt must be an integer multiple of run.quantum_dt"));
        }
        if integer_ratio(r.snapshot_every, r.classical_dt).is_none() {
            return Err(Error::invalid("run.snapshot_every must be an integer multiple of run.classical_dt"));
        }
        if integer_ratio(r.t_end, r.snapshot_every).is_none() {
            return Err(Error::invalid("run.t_end must be an integer multiple of run.snapshot_every"));
        }
        if r.initial_state.model() != r.model {
            return Err(Error::invalid(format!(
                "initial state {:?} does not apply to the {:?} model",
                r.initial_state, r.model
            )));
        }
        if r.model == ChainModel::Ising && r.evolution == Evolution::State {
            return Err(Error::invalid("state evolution is only available for the XX model"));
        }
        self.network.drive_model().validate()?;
        match &self.network {
            NetworkConfig::AllToAll { k_tilde: a, omega: b, omega_std: c, .. }
            | NetworkConfig::Zigzag { k1: a, omega: b, omega_std: c, .. } => {
                if ![*a, *b, *c].iter().all(|x| x.is_finite()) || *c < 0.0 {
                    return Err(Error::invalid("network parameters must be finite, omega_std ≥ 0"));
                }
            }
        }
        self.network.build(self.chain.n, r.seed)?;
        Ok(())
    }

    /// Snapshot times `0, Δ, 2Δ, …, t_end`.
    pub fn snapshot_times(&self) -> Vec<f64> {
        let count = integer_ratio(self.run.t_end, self.run.snapshot_every).unwrap_or(0);
        (0..=count).map(|k| k as f64 * self.run.snapshot_every).collect()
    }
}
