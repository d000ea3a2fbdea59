//! One-fermion sector of the XX chain and density diagnostics.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::generator::{XXGenerator, C64};
use super::propagator::{Propagator, PropagatorMatrix};
use super::spectrum::symmetric_eigen;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct WavefunctionState {
    pub psi: DVector<C64>,
}

impl WavefunctionState {
    pub fn new(psi: DVector<C64>) -> Self {
        Self { psi }
    }

    pub fn from_real(v: &[f64]) -> Self {
        Self { psi: DVector::from_iterator(v.len(), v.iter().map(|&x| C64::new(x, 0.0))) }
    }

    pub fn norm(&self) -> f64 {
        self.psi.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Site occupation `|ψ_i|²`.
    pub fn density(&self) -> Vec<f64> {
        self.psi.iter().map(|z| z.norm_sqr()).collect()
    }

    pub fn normalized(mut self) -> Self {
        let n = self.norm().sqrt();
        if n > 0.0 {
            self.psi /= C64::new(n, 0.0);
        }
        self
    }
}

/// How to pick the initial localized eigenstate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Selector {
    /// Largest inverse participation ratio.
    MaxIpr,
    /// Largest weight on the given (1-based) site.
    Site { site: usize },
    /// Largest IPR among states with at least `min_weight` inside sites
    /// `first..=last` (1-based); falls back to `MaxIpr` if none qualifies.
    MaxIprInRegion { first: usize, last: usize, min_weight: f64 },
}

impl Selector {
    /// Index of the chosen column among `densities`.
    pub fn pick(&self, densities: &[Vec<f64>]) -> Result<usize> {
        if densities.is_empty() {
            return Err(Error::invalid("no states to select from"));
        }
        let n = densities[0].len();
        let by_ipr = |cands: &mut dyn Iterator<Item = usize>| {
            cands.max_by(|&a, &b| ipr(&densities[a]).total_cmp(&ipr(&densities[b])))
        };
        match *self {
            Selector::MaxIpr => Ok(by_ipr(&mut (0..densities.len())).expect("nonempty")),
            Selector::Site { site } => {
                if site == 0 || site > n {
                    return Err(Error::invalid(format!("site {site} outside 1..={n}")));
                }
                Ok((0..densities.len())
                    .max_by(|&a, &b| densities[a][site - 1].total_cmp(&densities[b][site - 1]))
                    .expect("nonempty"))
            }
            Selector::MaxIprInRegion { first, last, min_weight } => {
                if first == 0 || last > n || first > last {
                    return Err(Error::invalid(format!("region {first}..={last} outside 1..={n}")));
                }
                let weight = |d: &Vec<f64>| d[first - 1..last].iter().sum::<f64>();
                let mut inside = (0..densities.len()).filter(|&k| weight(&densities[k]) >= min_weight);
                Ok(by_ipr(&mut inside).unwrap_or_else(|| by_ipr(&mut (0..densities.len())).expect("nonempty")))
            }
        }
    }
}

fn ipr(d: &[f64]) -> f64 {
    d.iter().map(|p| p * p).sum()
}

/// Chosen eigenstate plus where it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationInfo {
    pub index: usize,
    pub energy: f64,
    pub ipr: f64,
    /// Set when the state is barely more localized than a plane wave (`ipr·n < 2`).
    pub weakly_localized: bool,
}

/// Eigenvector of `h` picked by `selector`, normalized.
pub fn localized_eigenstate(gen: &XXGenerator, selector: Selector) -> Result<(WavefunctionState, LocalizationInfo)> {
    let (values, vectors) = symmetric_eigen(&gen.matrix(), "localized eigenstate")?;
    let densities: Vec<Vec<f64>> =
        (0..values.len()).map(|c| vectors.column(c).iter().map(|x| x * x).collect()).collect();
    let index = selector.pick(&densities)?;
    let v: Vec<f64> = vectors.column(index).iter().copied().collect();
    let state = WavefunctionState::from_real(&v).normalized();
    let p = ipr(&densities[index]);
    let info = LocalizationInfo { index, energy: values[index], ipr: p, weakly_localized: p * (gen.n() as f64) < 2.0 };
    Ok((state, info))
}

/// `ψ(t) = U ψ(0)`.
pub fn evolve_wavefunction(psi0: &WavefunctionState, prop: &Propagator) -> Result<WavefunctionState> {
    let u = match &prop.matrix {
        PropagatorMatrix::Complex(u) => u,
        PropagatorMatrix::Real(_) => return Err(Error::invalid("wavefunction evolution needs an XX propagator")),
    };
    if u.ncols() != psi0.psi.len() {
        return Err(Error::invalid("propagator and state sizes differ"));
    }
    Ok(WavefunctionState { psi: u * &psi0.psi })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityMetrics {
    pub ipr: f64,
    /// 1-based site coordinate.
    pub center_of_mass: f64,
    pub variance: f64,
}

/// IPR, center of mass and variance of a normalized site density.
pub fn density_metrics_from_weights(p: &[f64]) -> DensityMetrics {
    let x: f64 = p.iter().enumerate().map(|(i, w)| (i + 1) as f64 * w).sum();
    let var: f64 = p.iter().enumerate().map(|(i, w)| ((i + 1) as f64 - x).powi(2) * w).sum();
    DensityMetrics { ipr: ipr(p), center_of_mass: x, variance: var }
}

pub fn density_metrics(psi: &WavefunctionState) -> DensityMetrics {
    density_metrics_from_weights(&psi.density())
}

/// Site-resolved `|v_i|²` for every column of `vectors`.
pub fn column_densities(vectors: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..vectors.ncols()).map(|c| vectors.column(c).iter().map(|x| x * x).collect()).collect()
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::fermion::chain::{ChainParams, DriveField};
    use crate::fermion::generator::{build_xx_generator, Generator};
    use crate::fermion::propagator::{evolve_propagator, PropagatorKind};

    fn one_hot(n: usize, site: usize) -> WavefunctionState {
        let mut v = vec![0.0; n];
        v[site - 1] = 1.0;
        WavefunctionState::from_real(&v)
    }

    #[test]
    fn metrics_examples() {
        let m = density_metrics(&one_hot(10, 5));
        assert_eq!((m.ipr, m.center_of_mass, m.variance), (1.0, 5.0, 0.0));
        let n = 8;
        let uni = WavefunctionState::from_real(&vec![(1.0 / n as f64).sqrt(); n]);
        let m = density_metrics(&uni);
        assert!((m.ipr - 1.0 / n as f64).abs() < 1e-15);
        assert!((m.center_of_mass - (n as f64 + 1.0) / 2.0).abs() < 1e-12);
        let h = 0.5f64.sqrt();
        let two = WavefunctionState::from_real(&[h, 0.0, h, 0.0]);
        let m = density_metrics(&two);
        assert!((m.ipr - 0.5).abs() < 1e-15);
        assert!((m.center_of_mass - 2.0).abs() < 1e-15);
        assert!((m.variance - 1.0).abs() < 1e-15);
    }

    #[test]
    fn decoupled_chain_gives_one_hot() {
        let g = DVector::from_column_slice(&[0.4, -1.0, 2.5, 0.1]);
        let h = build_xx_generator(&ChainParams::xx(4, 0.0, 3.0), &DriveField::new(0.0, g)).unwrap();
        let (psi, info) = localized_eigenstate(&h, Selector::MaxIpr).unwrap();
        assert!((info.ipr - 1.0).abs() < 1e-12);
        assert!(!info.weakly_localized);
        assert!((density_metrics(&psi).ipr - 1.0).abs() < 1e-12);
        let (psi, _) = localized_eigenstate(&h, Selector::Site { site: 3 }).unwrap();
        assert!((psi.density()[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_chain_is_weakly_localized() {
        let n = 30;
        let h = build_xx_generator(&ChainParams::xx(n, 1.0, 3.0), &DriveField::uniform(0.0, n, 1.0)).unwrap();
        let (_, info) = localized_eigenstate(&h, Selector::MaxIpr).unwrap();
        // open-chain standing waves: IPR = 3 / (2(n+1))
        assert!((info.ipr - 1.5 / (n as f64 + 1.0)).abs() < 1e-9, "{}", info.ipr);
        assert!(info.weakly_localized);
    }

    #[test]
    fn region_selector_respects_weight() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = DVector::from_iterator(30, (0..30).map(|_| 3.0 * rng.random_range(-1.0f64..1.0)));
        let h = build_xx_generator(&ChainParams::xx(30, 1.0, 3.0), &DriveField::new(0.0, g)).unwrap();
        let sel = Selector::MaxIprInRegion { first: 1, last: 10, min_weight: 0.5 };
        let (psi, _) = localized_eigenstate(&h, sel).unwrap();
        assert!(psi.density()[..10].iter().sum::<f64>() >= 0.5);
        assert!(localized_eigenstate(&h, Selector::Site { site: 31 }).is_err());
    }

    #[test]
    fn identity_and_kind_checks() {
        let psi = one_hot(3, 2);
        let id = Propagator::identity(PropagatorKind::XxUnitary, 3, 0.0);
        assert_eq!(evolve_wavefunction(&psi, &id).unwrap(), psi);
        let wrong = Propagator::identity(PropagatorKind::MajoranaOrthogonal, 6, 0.0);
        assert!(evolve_wavefunction(&psi, &wrong).is_err());
    }

    #[test]
    fn eigenstate_only_picks_up_phase() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = DVector::from_iterator(8, (0..8).map(|_| rng.random_range(-3.0..3.0)));
        let h = build_xx_generator(&ChainParams::xx(8, 1.0, 3.0), &DriveField::new(0.0, g)).unwrap();
        let (psi, info) = localized_eigenstate(&h, Selector::MaxIpr).unwrap();
        let gen = Generator::Xx(h);
        let prop = evolve_propagator(|_| Ok(gen.clone()), 0.0, 4.0, 0.001).unwrap();
        let later = evolve_wavefunction(&psi, &prop).unwrap();
        let overlap: C64 = psi.psi.iter().zip(later.psi.iter()).map(|(a, b)| a.conj() * b).sum();
        assert!((overlap.norm() - 1.0).abs() < 1e-9);
        let expected = C64::from_polar(1.0, -info.energy * 4.0);
        assert!((overlap - expected).norm() < 1e-7);
        assert!((later.norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn decoupled_site_phase_rotation() {
        let g = DVector::from_column_slice(&[0.5, 1.5, -0.7]);
        let h = build_xx_generator(&ChainParams::xx(3, 0.0, 3.0), &DriveField::new(0.0, g)).unwrap();
        let gen = Generator::Xx(h);
        let t = 2.0;
        let prop = evolve_propagator(|_| Ok(gen.clone()), 0.0, t, 0.005).unwrap();
        let later = evolve_wavefunction(&one_hot(3, 2), &prop).unwrap();
        // h_22 = −2·1.5, ψ_2(t) = e^{+i·3t}
        assert!((later.psi[1] - C64::from_polar(1.0, 3.0 * t)).norm() < 1e-7);
        assert!(later.psi[0].norm() < 1e-15 && later.psi[2].norm() < 1e-15);
    }
}
