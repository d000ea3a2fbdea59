//! Instantaneous spectra and the canonical (block) form of Majorana generators.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::generator::{Generator, MajoranaGenerator, XXGenerator, C64};
use crate::error::{Error, Result};

const EIGEN_EPS: f64 = 1e-15;
const EIGEN_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumKind {
    /// Eigenvalues of `i·M`, length `2n`, symmetric under `ε → −ε`.
    Majorana,
    /// Eigenvalues of `h`, length `n`.
    Xx,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSnapshot {
    pub t: f64,
    pub kind: SpectrumKind,
    /// Sorted ascending.
    pub energies: Vec<f64>,
}

fn dump(m: &DMatrix<f64>) -> String {
    let mut s = format!("{}x{}\n", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:.17e}", m[(i, j)])).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

fn check_finite(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NumericalFailure { what: format!("{what}: non-finite generator"), dump: dump(m) })
    }
}

/// Eigen-decomposition of a real symmetric matrix, sorted ascending.
pub(crate) fn symmetric_eigen(m: &DMatrix<f64>, what: &str) -> Result<(Vec<f64>, DMatrix<f64>)> {
    check_finite(m, what)?;
    let eig = SymmetricEigen::try_new(m.clone(), EIGEN_EPS, EIGEN_MAX_ITER)
        .ok_or_else(|| Error::NumericalFailure { what: format!("{what}: symmetric eigensolver"), dump: dump(m) })?;
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(m.nrows(), order.len(), |i, c| eig.eigenvectors[(i, order[c])]);
    Ok((values, vectors))
}

/// Eigenvalues of the Hermitian matrix `i·M`, sorted ascending.
pub fn majorana_spectrum(gen: &MajoranaGenerator) -> Result<Vec<f64>> {
    let m = gen.matrix();
    check_finite(&m, "Majorana spectrum")?;
    // the spectrum of i·M is ± the singular values of M
    let sv = m
        .clone()
        .try_svd(false, false, EIGEN_EPS, EIGEN_MAX_ITER)
        .ok_or_else(|| Error::NumericalFailure { what: "Majorana spectrum: singular values".into(), dump: dump(&m) })?;
    let mut s: Vec<f64> = sv.singular_values.iter().copied().collect();
    s.sort_by(f64::total_cmp);
    // singular values come in equal pairs; keep one of each
    let half: Vec<f64> = s.chunks(2).map(|p| 0.5 * (p[0] + p[p.len() - 1])).collect();
    let mut v: Vec<f64> = half.iter().rev().map(|x| -x).chain(half.iter().copied()).collect();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Eigenpairs of `i·M`, eigenvalues ascending.
pub(crate) fn majorana_eigenvectors(gen: &MajoranaGenerator) -> Result<(Vec<f64>, DMatrix<C64>)> {
    let m = gen.matrix();
    check_finite(&m, "Majorana eigenvectors")?;
    let eig = SymmetricEigen::try_new(m.map(|x| C64::new(0.0, x)), EIGEN_EPS, EIGEN_MAX_ITER).ok_or_else(|| {
        Error::NumericalFailure { what: "Majorana eigenvectors: Hermitian eigensolver".into(), dump: dump(&m) }
    })?;
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(m.nrows(), order.len(), |i, c| eig.eigenvectors[(i, order[c])]);
    Ok((values, vectors))
}

pub fn xx_spectrum(gen: &XXGenerator) -> Result<Vec<f64>> {
    Ok(symmetric_eigen(&gen.matrix(), "XX spectrum")?.0)
}

pub fn instantaneous_spectrum(gen: &Generator) -> Result<SpectrumSnapshot> {
    Ok(match gen {
        Generator::Majorana(m) => {
            SpectrumSnapshot { t: m.t, kind: SpectrumKind::Majorana, energies: majorana_spectrum(m)? }
        }
        Generator::Xx(h) => SpectrumSnapshot { t: h.t, kind: SpectrumKind::Xx, energies: xx_spectrum(h)? },
    })
}

/// Quasiparticle energy of the uniform transverse-field Ising chain,
/// `ε_k = 2√((g + J_x cos k)² + (J_x sin k)²)`.
pub fn analytic_dispersion(g: f64, jx: f64, k: f64) -> f64 {
    2.0 * ((g + jx * k.cos()).powi(2) + (jx * k.sin()).powi(2)).sqrt()
}

/// Canonical form `Wᵀ M W = ⊕_m [[0, ε_m], [−ε_m, 0]]` of a Majorana generator.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenModes {
    /// `ε_m ≥ 0`, ascending, one per mode.
    pub energies: Vec<f64>,
    /// Real orthogonal `2n×2n`; columns `2m, 2m+1` span mode `m`.
    pub w: DMatrix<f64>,
}

impl EigenModes {
    pub fn n_modes(&self) -> usize {
        self.energies.len()
    }

    /// Site-resolved weight of mode `m`, normalized to sum to one.
    pub fn mode_density(&self, m: usize) -> Vec<f64> {
        let n = self.n_modes();
        (0..n)
            .map(|j| {
                let mut s = 0.0;
                for c in [2 * m, 2 * m + 1] {
                    s += self.w[(2 * j, c)].powi(2) + self.w[(2 * j + 1, c)].powi(2);
                }
                0.5 * s
            })
            .collect()
    }

    /// The block-diagonal canonical matrix `⊕ [[0, ε], [−ε, 0]]`.
    pub fn canonical(&self) -> DMatrix<f64> {
        let dim = 2 * self.n_modes();
        let mut b = DMatrix::zeros(dim, dim);
        for (m, &e) in self.energies.iter().enumerate() {
            b[(2 * m, 2 * m + 1)] = e;
            b[(2 * m + 1, 2 * m)] = -e;
        }
        b
    }
}

/// Real Schur form of an antisymmetric generator, normalized to `ε_m ≥ 0` ascending.
pub fn eigenmode_decomposition(gen: &MajoranaGenerator) -> Result<EigenModes> {
    let m = gen.matrix();
    check_finite(&m, "eigenmode decomposition")?;
    let dim = m.nrows();
    let (q, t) = m
        .clone()
        .try_schur(EIGEN_EPS, EIGEN_MAX_ITER)
        .ok_or_else(|| Error::NumericalFailure { what: "eigenmode decomposition: real Schur".into(), dump: dump(&m) })?
        .unpack();

    // 2×2 blocks carry ±ε; 1×1 blocks are zero modes and get paired up.
    let mut blocks: Vec<(f64, usize, usize)> = Vec::with_capacity(dim / 2);
    let mut singles = Vec::new();
    let mut i = 0;
    while i < dim {
        if i + 1 < dim && t[(i + 1, i)] != 0.0 {
            let e = 0.5 * (t[(i, i + 1)] - t[(i + 1, i)]);
            if e >= 0.0 {
                blocks.push((e, i, i + 1));
            } else {
                blocks.push((-e, i + 1, i));
            }
            i += 2;
        } else {
            singles.push(i);
            i += 1;
        }
    }
    if singles.len() % 2 != 0 {
        return Err(Error::NumericalFailure {
            what: "eigenmode decomposition: odd number of zero modes".into(),
            dump: dump(&m),
        });
    }
    for pair in singles.chunks(2) {
        blocks.push((0.0, pair[0], pair[1]));
    }
    blocks.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut w = DMatrix::zeros(dim, dim);
    for (k, &(_, c1, c2)) in blocks.iter().enumerate() {
        w.set_column(2 * k, &q.column(c1));
        w.set_column(2 * k + 1, &q.column(c2));
    }
    Ok(EigenModes { energies: blocks.iter().map(|b| b.0).collect(), w })
}
