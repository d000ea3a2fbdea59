use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use super::dynamics::PhaseState;
use crate::error::{Error, Result};

/// Natural-frequency assignment for a network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FrequencySpec {
    Uniform { value: f64 },
    Normal { mean: f64, std: f64, seed: u64 },
}

impl FrequencySpec {
    pub fn sample(&self, n: usize) -> Result<DVector<f64>> {
        match *self {
            FrequencySpec::Uniform { value } => {
                if !value.is_finite() {
                    return Err(Error::invalid("frequency must be finite"));
                }
                Ok(DVector::from_element(n, value))
            }
            FrequencySpec::Normal { mean, std, seed } => {
                if !(std >= 0.0) || !std.is_finite() {
                    return Err(Error::invalid(format!("frequency std must be >= 0, got {std}")));
                }
                let dist = Normal::new(mean, std)
                    .map_err(|e| Error::invalid(format!("normal frequency distribution: {e}")))?;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                Ok(DVector::from_iterator(n, (0..n).map(|_| dist.sample(&mut rng))))
            }
        }
    }
}

/// Oscillator network: `θ̇_i = ω_i + Σ_j K_ij sin(θ_j − θ_i + B_ij)`.
///
/// Coupling is stored exactly as it multiplies the sine (no 1/N scaling).
/// An absent edge is a coupling entry of exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    coupling: DMatrix<f64>,
    delay: DMatrix<f64>,
    freqs: DVector<f64>,
    edges: Vec<Edge>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Edge {
    pub from: usize,
    pub to: usize,
    pub k: f64,
    pub beta: f64,
}

impl NetworkSpec {
    pub fn new(coupling: DMatrix<f64>, delay: DMatrix<f64>, freqs: DVector<f64>) -> Result<Self> {
        let n = freqs.len();
        if n == 0 {
            return Err(Error::invalid("network needs at least one oscillator"));
        }
        if coupling.shape() != (n, n) || delay.shape() != (n, n) {
            return Err(Error::invalid(format!(
                "coupling {:?} and delay {:?} must both be {n}x{n}",
                coupling.shape(),
                delay.shape()
            )));
        }
        if coupling.iter().chain(delay.iter()).chain(freqs.iter()).any(|x| !x.is_finite()) {
            return Err(Error::invalid("network entries must be finite"));
        }
        let mut edges = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let k = coupling[(i, j)];
                if k != 0.0 {
                    edges.push(Edge { from: i, to: j, k, beta: delay[(i, j)] });
                }
            }
        }
        Ok(Self { coupling, delay, freqs, edges })
    }

    pub fn n(&self) -> usize {
        self.freqs.len()
    }

    pub fn coupling(&self) -> &DMatrix<f64> {
        &self.coupling
    }

    pub fn delay(&self) -> &DMatrix<f64> {
        &self.delay
    }

    pub fn freqs(&self) -> &DVector<f64> {
        &self.freqs
    }

    pub(crate) fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Replace the natural frequencies, keeping the topology.
    pub fn with_freqs(self, freqs: DVector<f64>) -> Result<Self> {
        Self::new(self.coupling, self.delay, freqs)
    }
}

/// All-to-all network with `K_ij = k_tilde` (diagonal included), no delay, uniform frequency.
pub fn build_all_to_all(n: usize, k_tilde: f64, omega: f64) -> Result<NetworkSpec> {
    if n == 0 {
        return Err(Error::invalid("all-to-all network needs n >= 1"));
    }
    if !k_tilde.is_finite() {
        return Err(Error::invalid("k_tilde must be finite"));
    }
    NetworkSpec::new(DMatrix::from_element(n, n, k_tilde), DMatrix::zeros(n, n), DVector::from_element(n, omega))
}

/// Unidirectional zig-zag network: oscillator `i` feels `i+1` with `k1` and
/// `i+2` with `k2`, with delay `−2rπ/3` on range `r`. Targets past the end are dropped.
pub fn build_zigzag(n: usize, k1: f64, k2: f64, omega: f64) -> Result<NetworkSpec> {
    build_zigzag_with_delay_sign(n, k1, k2, omega, -1.0)
}

/// Zig-zag network with delay `sign·2rπ/3`; `sign = +1` reverses the travelling direction.
pub fn build_zigzag_with_delay_sign(n: usize, k1: f64, k2: f64, omega: f64, sign: f64) -> Result<NetworkSpec> {
    if n < 3 {
        return Err(Error::invalid(format!("zig-zag network needs n >= 3, got {n}")));
    }
    let mut coupling = DMatrix::zeros(n, n);
    let mut delay = DMatrix::zeros(n, n);
    for i in 0..n {
        for (r, k) in [(1usize, k1), (2, k2)] {
            let j = i + r;
            if j < n {
                coupling[(i, j)] = k;
                delay[(i, j)] = sign * 2.0 * r as f64 * PI / 3.0;
            }
        }
    }
    NetworkSpec::new(coupling, delay, DVector::from_element(n, omega))
}

/// Initial phases drawn uniformly from `[−π, π]`, reproducible per seed.
pub fn random_initial_phases(n: usize, seed: u64) -> PhaseState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = Uniform::new_inclusive(-PI, PI).expect("finite bounds");
    PhaseState { t: 0.0, theta: DVector::from_iterator(n, (0..n).map(|_| dist.sample(&mut rng))) }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_to_all_matches_caption_parameters() {
        let net = build_all_to_all(3, 0.5, 0.5).unwrap();
        assert!(net.coupling().iter().all(|&k| k == 0.5));
        assert!(net.delay().iter().all(|&b| b == 0.0));
        assert!(net.freqs().iter().all(|&w| w == 0.5));
    }

    #[test]
    fn all_to_all_rejects_empty() {
        assert!(matches!(build_all_to_all(0, 1.0, 1.0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn zigzag_structure() {
        let net = build_zigzag(30, 0.2, 0.1, 0.04).unwrap();
        let k = net.coupling();
        let b = net.delay();
        for i in 0..30 {
            for j in 0..30 {
                match j as isize - i as isize {
                    1 => {
                        assert_eq!(k[(i, j)], 0.2);
                        assert!((b[(i, j)] + 2.0 * PI / 3.0).abs() < 1e-15);
                    }
                    2 => {
                        assert_eq!(k[(i, j)], 0.1);
                        assert!((b[(i, j)] + 4.0 * PI / 3.0).abs() < 1e-15);
                    }
                    _ => {
                        assert_eq!(k[(i, j)], 0.0);
                        assert_eq!(b[(i, j)], 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn zigzag_last_row_is_free() {
        let net = build_zigzag(3, 0.2, 0.1, 0.0).unwrap();
        assert!(net.coupling().row(2).iter().all(|&k| k == 0.0));
        assert_eq!(net.coupling()[(1, 2)], 0.2);
        assert_eq!(net.coupling()[(0, 2)], 0.1);
    }

    #[test]
    fn zigzag_k2_zero_is_nearest_neighbour_chain() {
        let net = build_zigzag(4, 1.0, 0.0, 0.0).unwrap();
        assert_eq!(net.edges().len(), 3);
        for e in net.edges() {
            assert_eq!(e.to, e.from + 1);
            assert!((e.beta + 2.0 * PI / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn zigzag_needs_three_sites() {
        assert!(build_zigzag(2, 0.2, 0.1, 0.0).is_err());
    }

    #[test]
    fn random_phases_deterministic_and_in_range() {
        let a = random_initial_phases(30, 42);
        let b = random_initial_phases(30, 42);
        assert_eq!(a.theta, b.theta);
        assert!(a.theta.iter().all(|x| (-PI..=PI).contains(x)));
        let one = random_initial_phases(1, 9);
        assert!((-PI..=PI).contains(&one.theta[0]));
    }

    #[test]
    fn random_phases_moments() {
        let s = random_initial_phases(10_000, 7);
        let n = s.theta.len() as f64;
        let mean = s.theta.sum() / n;
        let var = s.theta.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 0.1, "mean {mean}");
        let expected = PI * PI / 3.0;
        assert!((var - expected).abs() < 0.1 * expected, "var {var}");
    }

    #[test]
    fn normal_frequencies_reproducible() {
        let spec = FrequencySpec::Normal { mean: 1.0, std: 0.1, seed: 3 };
        let a = spec.sample(50).unwrap();
        assert_eq!(a, spec.sample(50).unwrap());
        let mean = a.sum() / 50.0;
        assert!((mean - 1.0).abs() < 0.1);
        assert!(FrequencySpec::Normal { mean: 0.0, std: -1.0, seed: 0 }.sample(3).is_err());
    }
}
