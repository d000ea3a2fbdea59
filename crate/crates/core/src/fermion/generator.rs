//! Single-particle generators of the Heisenberg flow.
//!
//! Both generators are stored as coordinate lists; they have at most three
//! nonzeros per row and are applied to dense propagators many thousands of
//! times per run.

use nalgebra::{Complex, DMatrix};

use super::chain::{Boundary, ChainParams, DriveField};
use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// Coordinate-list entry `(row, col, value)`.
pub type Entry = (usize, usize, f64);

/// Real antisymmetric `2n×2n` matrix `M(t)` of the Ising Majorana flow `ȧ = M a`.
///
/// Majorana `a_{2j−1}` sits at index `2j−2`, `a_{2j}` at `2j−1` (0-based).
#[derive(Debug, Clone, PartialEq)]
pub struct MajoranaGenerator {
    pub t: f64,
    n: usize,
    entries: Vec<Entry>,
}

/// Real symmetric `n×n` single-particle matrix `h(t)` of the XX chain, `i ψ̇ = h ψ`.
#[derive(Debug, Clone, PartialEq)]
pub struct XXGenerator {
    pub t: f64,
    n: usize,
    entries: Vec<Entry>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Generator {
    Majorana(MajoranaGenerator),
    Xx(XXGenerator),
}

fn check_field(params: &ChainParams, g: &DriveField) -> Result<()> {
    params.validate()?;
    if g.g.len() != params.n {
        return Err(Error::invalid(format!("drive field has {} sites, chain has {}", g.g.len(), params.n)));
    }
    Ok(())
}

/// Builds `M` for the Ising chain (`J_y = 0`):
/// `ȧ_{2i−1} = g_i a_{2i} − J_x a_{2i−2}`, `ȧ_{2i} = −g_i a_{2i−1} + J_x a_{2i+1}`.
pub fn build_majorana_generator(params: &ChainParams, g: &DriveField) -> Result<MajoranaGenerator> {
    if params.jy != 0.0 {
        return Err(Error::UnsupportedModel(format!(
            "Majorana flow needs J_y = 0 (Ising chain), got J_y = {}",
            params.jy
        )));
    }
    check_field(params, g)?;
    let n = params.n;
    let jx = params.jx;
    let mut entries = Vec::with_capacity(4 * n);
    for (s, &gs) in g.g.iter().enumerate() {
        entries.push((2 * s, 2 * s + 1, gs));
        entries.push((2 * s + 1, 2 * s, -gs));
    }
    let mut bond = |left: usize, right: usize| {
        // a_{2·left} couples to a_{2·right−1}
        entries.push((2 * right, 2 * left + 1, -jx));
        entries.push((2 * left + 1, 2 * right, jx));
    };
    for s in 0..n - 1 {
        bond(s, s + 1);
    }
    if params.boundary == Boundary::Periodic {
        bond(n - 1, 0);
    }
    Ok(MajoranaGenerator { t: g.t, n, entries })
}

/// Builds `h` for the XX chain (`J_x = J_y = J`): `h_ii = −2 g_i`, `h_{i,i±1} = −2J`.
pub fn build_xx_generator(params: &ChainParams, g: &DriveField) -> Result<XXGenerator> {
    if params.jx != params.jy {
        return Err(Error::UnsupportedModel(format!(
            "XX single-particle flow needs J_x = J_y, got {} and {}",
            params.jx, params.jy
        )));
    }
    check_field(params, g)?;
    let n = params.n;
    let hop = -2.0 * params.jx;
    let mut entries = Vec::with_capacity(3 * n);
    for (i, &gi) in g.g.iter().enumerate() {
        entries.push((i, i, -2.0 * gi));
    }
    for i in 0..n - 1 {
        entries.push((i, i + 1, hop));
        entries.push((i + 1, i, hop));
    }
    if params.boundary == Boundary::Periodic {
        entries.push((n - 1, 0, hop));
        entries.push((0, n - 1, hop));
    }
    Ok(XXGenerator { t: g.t, n, entries })
}

/// Builds the generator matching the chain's couplings.
pub fn build_generator(params: &ChainParams, g: &DriveField) -> Result<Generator> {
    if params.jy == 0.0 {
        build_majorana_generator(params, g).map(Generator::Majorana)
    } else if params.jx == params.jy {
        build_xx_generator(params, g).map(Generator::Xx)
    } else {
        Err(Error::UnsupportedModel(format!(
            "general XY chain (J_x = {}, J_y = {}) is not a supported free-fermion flow",
            params.jx, params.jy
        )))
    }
}

fn to_dense(dim: usize, entries: &[Entry]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(dim, dim);
    for &(i, j, v) in entries {
        m[(i, j)] += v;
    }
    m
}

impl MajoranaGenerator {
    /// Builds a generator from an arbitrary real antisymmetric matrix.
    pub fn from_matrix(t: f64, m: &DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = m.shape();
        if rows != cols || rows % 2 != 0 || rows == 0 {
            return Err(Error::invalid(format!("Majorana generator must be 2n×2n, got {rows}×{cols}")));
        }
        let mut entries = Vec::new();
        for j in 0..cols {
            for i in 0..rows {
                if m[(i, j)] != -m[(j, i)] {
                    return Err(Error::invalid("Majorana generator must be antisymmetric"));
                }
                if m[(i, j)] != 0.0 {
                    entries.push((i, j, m[(i, j)]));
                }
            }
        }
        Ok(Self { t, n: rows / 2, entries })
    }

    /// Number of sites (half the Majorana dimension).
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        2 * self.n
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        to_dense(self.dim(), &self.entries)
    }

    /// `out = scale · M · x` for a dense real `x`.
    pub(crate) fn apply(&self, x: &DMatrix<f64>, scale: f64, out: &mut DMatrix<f64>) {
        apply_real(&self.entries, x, scale, out);
    }
}

impl XXGenerator {
    pub fn from_matrix(t: f64, h: &DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = h.shape();
        if rows != cols || rows == 0 {
            return Err(Error::invalid("XX generator must be square"));
        }
        let mut entries = Vec::new();
        for j in 0..cols {
            for i in 0..rows {
                if h[(i, j)] != h[(j, i)] {
                    return Err(Error::invalid("XX generator must be symmetric"));
                }
                if h[(i, j)] != 0.0 {
                    entries.push((i, j, h[(i, j)]));
                }
            }
        }
        Ok(Self { t, n: rows, entries })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        to_dense(self.n, &self.entries)
    }

    /// `out = −i · scale · h · x` for a dense complex `x`.
    pub(crate) fn apply(&self, x: &DMatrix<C64>, scale: f64, out: &mut DMatrix<C64>) {
        let rows = x.nrows();
        out.fill(C64::new(0.0, 0.0));
        let xs = x.as_slice();
        let os = out.as_mut_slice();
        for c in 0..x.ncols() {
            let col = c * rows;
            for &(i, j, v) in &self.entries {
                let z = xs[col + j];
                // −i·v·z
                os[col + i] += C64::new(v * z.im, -v * z.re) * scale;
            }
        }
    }
}

pub(crate) fn apply_real(entries: &[Entry], x: &DMatrix<f64>, scale: f64, out: &mut DMatrix<f64>) {
    let rows = x.nrows();
    out.fill(0.0);
    let xs = x.as_slice();
    let os = out.as_mut_slice();
    for c in 0..x.ncols() {
        let col = c * rows;
        for &(i, j, v) in entries {
            os[col + i] += scale * v * xs[col + j];
        }
    }
}

impl Generator {
    pub fn t(&self) -> f64 {
        match self {
            Generator::Majorana(m) => m.t,
            Generator::Xx(h) => h.t,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            Generator::Majorana(m) => m.n(),
            Generator::Xx(h) => h.n(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Generator::Majorana(m) => m.dim(),
            Generator::Xx(h) => h.dim(),
        }
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        match self {
            Generator::Majorana(m) => m.matrix(),
            Generator::Xx(h) => h.matrix(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Generator::Majorana(_) => "majorana",
            Generator::Xx(_) => "xx",
        }
    }
}
