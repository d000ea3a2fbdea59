//! Gaussian (quasi-free) states of the Ising chain in Majorana covariance form.
//!
//! Conventions: `a_{2j−1} = f_j† + f_j`, `a_{2j} = i(f_j† − f_j)`, so
//! `{a_m, a_n} = 2δ_mn`, and `Γ_mn = (i/2)⟨[a_m, a_n]⟩`. With the string
//! `f_j = (∏_{l<j} σ^z_l) σ^+_j` this gives `a_{2j−1} = (∏ σ^z) σ^x_j`,
//! `a_{2j} = (∏ σ^z) σ^y_j` and `σ^z_j = −i a_{2j−1} a_{2j}`.

use nalgebra::DMatrix;

use super::propagator::{Propagator, PropagatorMatrix};
use super::spectrum::EigenModes;
use crate::error::{Error, Result};

/// Sign `s` in `⟨σ^z_j⟩ = s · Γ_{2j−1,2j}`.
///
/// Pinned by the decoupled limit `J_x = 0, g_j > 0`, whose ground state is
/// all spins up (`⟨σ^z_j⟩ = +1`) while its covariance block is `Γ_{2j−1,2j} = −1`.
pub const SIGMA_Z_SIGN: f64 = -1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    gamma: DMatrix<f64>,
}

impl CovarianceMatrix {
    pub fn new(gamma: DMatrix<f64>) -> Result<Self> {
        let (r, c) = gamma.shape();
        if r != c || r % 2 != 0 || r == 0 {
            return Err(Error::invalid(format!("covariance must be 2n×2n, got {r}×{c}")));
        }
        let asym = (&gamma + gamma.transpose()).amax();
        if asym > 1e-8 {
            return Err(Error::invalid(format!("covariance is not antisymmetric (defect {asym:e})")));
        }
        Ok(Self { gamma })
    }

    /// Maximally mixed state, `Γ = 0`.
    pub fn maximally_mixed(n: usize) -> Self {
        Self { gamma: DMatrix::zeros(2 * n, 2 * n) }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.gamma
    }

    pub fn n(&self) -> usize {
        self.gamma.nrows() / 2
    }

    /// `‖ΓᵀΓ − I‖_max`, zero for pure states.
    pub fn purity_defect(&self) -> f64 {
        let d = self.gamma.nrows();
        (self.gamma.transpose() * &self.gamma - DMatrix::identity(d, d)).amax()
    }

    pub fn singular_values(&self) -> Vec<f64> {
        let mut s: Vec<f64> = self.gamma.clone().singular_values().iter().copied().collect();
        s.sort_by(f64::total_cmp);
        s
    }
}

/// Pure Gaussian state with the given quasiparticle occupations of `modes`.
///
/// An empty mode contributes the block `[[0, −1], [1, 0]]`, an occupied one
/// `[[0, 1], [−1, 0]]`; `Γ = W · blocks · Wᵀ`.
pub fn covariance_from_occupations(modes: &EigenModes, occupations: &[bool]) -> Result<CovarianceMatrix> {
    let n = modes.n_modes();
    if occupations.len() != n {
        return Err(Error::invalid(format!("{} occupations for {n} modes", occupations.len())));
    }
    let mut blocks = DMatrix::zeros(2 * n, 2 * n);
    for (m, &occ) in occupations.iter().enumerate() {
        let s = if occ { 1.0 } else { -1.0 };
        blocks[(2 * m, 2 * m + 1)] = s;
        blocks[(2 * m + 1, 2 * m)] = -s;
    }
    let gamma = &modes.w * blocks * modes.w.transpose();
    let gamma = (&gamma - gamma.transpose()) * 0.5;
    Ok(CovarianceMatrix { gamma })
}

/// `Γ(t) = O Γ(0) Oᵀ`.
pub fn evolve_covariance(gamma0: &CovarianceMatrix, prop: &Propagator) -> Result<CovarianceMatrix> {
    let o = match &prop.matrix {
        PropagatorMatrix::Real(o) => o,
        PropagatorMatrix::Complex(_) => return Err(Error::invalid("covariance evolution needs a Majorana propagator")),
    };
    if o.nrows() != gamma0.gamma.nrows() {
        return Err(Error::invalid(format!(
            "propagator is {}×{}, covariance is {}×{}",
            o.nrows(),
            o.ncols(),
            gamma0.gamma.nrows(),
            gamma0.gamma.ncols()
        )));
    }
    let g = o * &gamma0.gamma * o.transpose();
    Ok(CovarianceMatrix { gamma: (&g - g.transpose()) * 0.5 })
}

/// `⟨σ^z_j⟩` for every site.
pub fn sigma_z_profile(gamma: &CovarianceMatrix) -> Vec<f64> {
    (0..gamma.n()).map(|j| SIGMA_Z_SIGN * gamma.gamma[(2 * j, 2 * j + 1)]).collect()
}

/// `⟨H⟩` for `H = (i/2) Σ_mn M_mn a_m a_n`, i.e. `½ Σ_mn M_mn Γ_mn`.
///
/// In this convention the quasiparticle vacuum has energy `−Σ ε_m` and each
/// occupied mode adds `2ε_m`.
pub fn state_energy(m: &DMatrix<f64>, gamma: &CovarianceMatrix) -> f64 {
    0.5 * m.component_mul(&gamma.gamma).sum()
}

/// Site density of the quasiparticle carried by Majorana vectors `u`, `v`
/// (the evolved columns of an occupied mode); sums to one for unit vectors.
pub fn mode_pair_density(u: &[f64], v: &[f64]) -> Vec<f64> {
    let n = u.len() / 2;
    (0..n).map(|j| 0.5 * (u[2 * j].powi(2) + u[2 * j + 1].powi(2) + v[2 * j].powi(2) + v[2 * j + 1].powi(2))).collect()
}
