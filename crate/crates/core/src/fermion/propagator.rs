//! Time-ordered propagators of the Majorana (orthogonal) and XX (unitary) flows.
//!
//! Integration is classic RK4 on `Ȯ = M(t) O` or `U̇ = −i h(t) U` starting from
//! the identity. After each step the orthogonality/unitarity defect
//! `‖XᵀX − I‖_max` is measured and the matrix is replaced by its polar factor;
//! a defect above [`UNSTABLE_THRESHOLD`] rejects the step instead.
//!
//! The same stepper can carry a rectangular block of columns (a state vector or
//! a few mode vectors) instead of the full matrix.

use nalgebra::{DMatrix, SVD};
use serde::{Deserialize, Serialize};

use super::generator::{Generator, MajoranaGenerator, XXGenerator, C64};
use crate::error::{Error, Result};

pub const UNSTABLE_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropagatorKind {
    MajoranaOrthogonal,
    XxUnitary,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PropagatorMatrix {
    Real(DMatrix<f64>),
    Complex(DMatrix<C64>),
}

/// Bookkeeping of one propagation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DefectStats {
    pub steps: usize,
    pub projections: usize,
    /// Largest defect seen right after a step, before any projection.
    pub max_step_defect: f64,
}

impl DefectStats {
    pub fn merge(&mut self, other: &DefectStats) {
        self.steps += other.steps;
        self.projections += other.projections;
        self.max_step_defect = self.max_step_defect.max(other.max_step_defect);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Propagator {
    pub matrix: PropagatorMatrix,
    pub t0: f64,
    pub t1: f64,
    pub stats: DefectStats,
}

impl Propagator {
    pub fn identity(kind: PropagatorKind, dim: usize, t: f64) -> Self {
        let matrix = match kind {
            PropagatorKind::MajoranaOrthogonal => PropagatorMatrix::Real(DMatrix::identity(dim, dim)),
            PropagatorKind::XxUnitary => PropagatorMatrix::Complex(DMatrix::identity(dim, dim)),
        };
        Self { matrix, t0: t, t1: t, stats: DefectStats::default() }
    }

    pub fn kind(&self) -> PropagatorKind {
        match self.matrix {
            PropagatorMatrix::Real(_) => PropagatorKind::MajoranaOrthogonal,
            PropagatorMatrix::Complex(_) => PropagatorKind::XxUnitary,
        }
    }

    pub fn dim(&self) -> usize {
        match &self.matrix {
            PropagatorMatrix::Real(m) => m.nrows(),
            PropagatorMatrix::Complex(m) => m.nrows(),
        }
    }

    pub fn real(&self) -> Option<&DMatrix<f64>> {
        match &self.matrix {
            PropagatorMatrix::Real(m) => Some(m),
            PropagatorMatrix::Complex(_) => None,
        }
    }

    pub fn complex(&self) -> Option<&DMatrix<C64>> {
        match &self.matrix {
            PropagatorMatrix::Complex(m) => Some(m),
            PropagatorMatrix::Real(_) => None,
        }
    }

    /// Current `‖XᵀX − I‖_max` (or `X†X` for the unitary kind).
    pub fn defect(&self) -> f64 {
        match &self.matrix {
            PropagatorMatrix::Real(m) => real_defect(m),
            PropagatorMatrix::Complex(m) => complex_defect(m),
        }
    }

    /// `self` after `earlier`: the propagator over `[earlier.t0, self.t1]`.
    pub fn compose(&self, earlier: &Propagator) -> Result<Propagator> {
        if (earlier.t1 - self.t0).abs() > 1e-9 * self.t0.abs().max(1.0) {
            return Err(Error::invalid("propagators are not contiguous in time"));
        }
        let matrix = match (&self.matrix, &earlier.matrix) {
            (PropagatorMatrix::Real(a), PropagatorMatrix::Real(b)) if a.shape() == b.shape() => {
                PropagatorMatrix::Real(a * b)
            }
            (PropagatorMatrix::Complex(a), PropagatorMatrix::Complex(b)) if a.shape() == b.shape() => {
                PropagatorMatrix::Complex(a * b)
            }
            _ => return Err(Error::invalid("propagator kinds or sizes differ")),
        };
        let mut stats = earlier.stats;
        stats.merge(&self.stats);
        Ok(Propagator { matrix, t0: earlier.t0, t1: self.t1, stats })
    }
}

pub(crate) fn real_defect(m: &DMatrix<f64>) -> f64 {
    let (n, k) = m.shape();
    let s = m.as_slice();
    let mut worst: f64 = 0.0;
    for i in 0..k {
        let ci = &s[i * n..(i + 1) * n];
        for j in i..k {
            let cj = &s[j * n..(j + 1) * n];
            let dot: f64 = ci.iter().zip(cj).map(|(a, b)| a * b).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((dot - target).abs());
        }
    }
    worst
}

pub(crate) fn complex_defect(m: &DMatrix<C64>) -> f64 {
    let (n, k) = m.shape();
    let s = m.as_slice();
    let mut worst: f64 = 0.0;
    for i in 0..k {
        let ci = &s[i * n..(i + 1) * n];
        for j in i..k {
            let cj = &s[j * n..(j + 1) * n];
            let (mut re, mut im) = (0.0, 0.0);
            for (a, b) in ci.iter().zip(cj) {
                // conj(a)·b
                re += a.re * b.re + a.im * b.im;
                im += a.re * b.im - a.im * b.re;
            }
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((re - target).hypot(im));
        }
    }
    worst
}

/// Nearest matrix with orthonormal columns (polar factor).
///
/// Newton-Schulz iteration `X ← X(3I − XᵀX)/2` converges quadratically to the
/// polar factor from a nearly orthogonal start; larger defects go through an SVD.
pub fn project_orthogonal(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.ncols();
    if real_defect(m) > 1e-2 {
        let svd = SVD::new(m.clone(), true, true);
        return svd.u.expect("u requested") * svd.v_t.expect("v_t requested");
    }
    let mut x = m.clone();
    for _ in 0..8 {
        let gram = x.transpose() * &x;
        let d = gram
            .iter()
            .enumerate()
            .fold(0.0f64, |acc, (k, &v)| acc.max((v - if k % (n + 1) == 0 { 1.0 } else { 0.0 }).abs()));
        if d < 1e-15 {
            break;
        }
        let corr = (DMatrix::identity(n, n) * 3.0 - gram) * 0.5;
        x = &x * corr;
    }
    x
}

/// Nearest matrix with unitary-orthonormal columns (polar factor).
pub fn project_unitary(m: &DMatrix<C64>) -> DMatrix<C64> {
    let n = m.ncols();
    if complex_defect(m) > 1e-2 {
        let svd = SVD::new(m.clone(), true, true);
        return svd.u.expect("u requested") * svd.v_t.expect("v_t requested");
    }
    let mut x = m.clone();
    for _ in 0..8 {
        let gram = x.adjoint() * &x;
        let d = gram
            .iter()
            .enumerate()
            .fold(0.0f64, |acc, (k, v)| acc.max((v - C64::new(if k % (n + 1) == 0 { 1.0 } else { 0.0 }, 0.0)).norm()));
        if d < 1e-15 {
            break;
        }
        let corr = (DMatrix::<C64>::identity(n, n) * C64::new(3.0, 0.0) - gram) * C64::new(0.5, 0.0);
        x = &x * corr;
    }
    x
}

/// Projection after a step whose defect `d` is already known to be small:
/// one Newton-Schulz sweep leaves a defect of order `d²`, two cover `d ≤ 1e-6`.
fn polish_orthogonal(m: &DMatrix<f64>, d: f64) -> DMatrix<f64> {
    let n = m.ncols();
    let mut x = m.clone();
    for _ in 0..if d > 1e-8 { 2 } else { 1 } {
        let corr = (DMatrix::identity(n, n) * 3.0 - x.transpose() * &x) * 0.5;
        x = &x * corr;
    }
    x
}

fn polish_unitary(m: &DMatrix<C64>, d: f64) -> DMatrix<C64> {
    let n = m.ncols();
    let mut x = m.clone();
    for _ in 0..if d > 1e-8 { 2 } else { 1 } {
        let corr = (DMatrix::<C64>::identity(n, n) * C64::new(3.0, 0.0) - x.adjoint() * &x) * C64::new(0.5, 0.0);
        x = &x * corr;
    }
    x
}

/// Step-by-step propagator integration.
///
/// Holds the running matrix so callers can interleave snapshots with evolution.
pub struct PropagatorStepper {
    prop: Propagator,
    k1: PropagatorMatrix,
    k2: PropagatorMatrix,
    k3: PropagatorMatrix,
    k4: PropagatorMatrix,
    tmp: PropagatorMatrix,
}

impl PropagatorStepper {
    pub fn new(kind: PropagatorKind, dim: usize, t0: f64) -> Self {
        let zero = || match kind {
            PropagatorKind::MajoranaOrthogonal => PropagatorMatrix::Real(DMatrix::zeros(dim, dim)),
            PropagatorKind::XxUnitary => PropagatorMatrix::Complex(DMatrix::zeros(dim, dim)),
        };
        Self { prop: Propagator::identity(kind, dim, t0), k1: zero(), k2: zero(), k3: zero(), k4: zero(), tmp: zero() }
    }

    /// Evolves the columns of `start` instead of the identity.
    pub fn from_matrix(start: PropagatorMatrix, t0: f64) -> Self {
        let zero = || match &start {
            PropagatorMatrix::Real(m) => PropagatorMatrix::Real(DMatrix::zeros(m.nrows(), m.ncols())),
            PropagatorMatrix::Complex(m) => PropagatorMatrix::Complex(DMatrix::zeros(m.nrows(), m.ncols())),
        };
        let (k1, k2, k3, k4, tmp) = (zero(), zero(), zero(), zero(), zero());
        Self { prop: Propagator { matrix: start, t0, t1: t0, stats: DefectStats::default() }, k1, k2, k3, k4, tmp }
    }

    pub fn propagator(&self) -> &Propagator {
        &self.prop
    }

    pub fn into_propagator(self) -> Propagator {
        self.prop
    }

    pub fn time(&self) -> f64 {
        self.prop.t1
    }

    /// One RK4 step of size `h` landing exactly on `t_next`.
    ///
    /// `gen_at` is evaluated at the start, midpoint and end of the step.
    pub fn step<F>(&mut self, gen_at: &mut F, h: f64, t_next: f64) -> Result<()>
    where
        F: FnMut(f64) -> Result<Generator>,
    {
        let t = self.prop.t1;
        let g1 = gen_at(t)?;
        let g2 = gen_at(t + 0.5 * h)?;
        let g4 = gen_at(t_next)?;
        match (&mut self.prop.matrix, &mut self.k1, &mut self.k2, &mut self.k3, &mut self.k4, &mut self.tmp) {
            (
                PropagatorMatrix::Real(o),
                PropagatorMatrix::Real(k1),
                PropagatorMatrix::Real(k2),
                PropagatorMatrix::Real(k3),
                PropagatorMatrix::Real(k4),
                PropagatorMatrix::Real(tmp),
            ) => {
                let (m1, m2, m4) = (majorana(&g1)?, majorana(&g2)?, majorana(&g4)?);
                check_dim(m1.dim(), o.nrows())?;
                m1.apply(o, 1.0, k1);
                shifted(tmp, o, 0.5 * h, k1);
                m2.apply(tmp, 1.0, k2);
                shifted(tmp, o, 0.5 * h, k2);
                m2.apply(tmp, 1.0, k3);
                shifted(tmp, o, h, k3);
                m4.apply(tmp, 1.0, k4);
                combine_real(o, k1, k2, k3, k4, h);
                let d = real_defect(o);
                self.prop.stats.max_step_defect = self.prop.stats.max_step_defect.max(d);
                if d > UNSTABLE_THRESHOLD || !d.is_finite() {
                    return Err(Error::IntegrationUnstable { t: t_next, defect: d });
                }
                *o = polish_orthogonal(o, d);
                self.prop.stats.projections += 1;
            }
            (
                PropagatorMatrix::Complex(u),
                PropagatorMatrix::Complex(k1),
                PropagatorMatrix::Complex(k2),
                PropagatorMatrix::Complex(k3),
                PropagatorMatrix::Complex(k4),
                PropagatorMatrix::Complex(tmp),
            ) => {
                let (h1, h2, h4) = (xx(&g1)?, xx(&g2)?, xx(&g4)?);
                check_dim(h1.dim(), u.nrows())?;
                let half = C64::new(0.5 * h, 0.0);
                h1.apply(u, 1.0, k1);
                shifted(tmp, u, half, k1);
                h2.apply(tmp, 1.0, k2);
                shifted(tmp, u, half, k2);
                h2.apply(tmp, 1.0, k3);
                shifted(tmp, u, C64::new(h, 0.0), k3);
                h4.apply(tmp, 1.0, k4);
                combine_complex(u, k1, k2, k3, k4, h);
                let d = complex_defect(u);
                self.prop.stats.max_step_defect = self.prop.stats.max_step_defect.max(d);
                if d > UNSTABLE_THRESHOLD || !d.is_finite() {
                    return Err(Error::IntegrationUnstable { t: t_next, defect: d });
                }
                *u = polish_unitary(u, d);
                self.prop.stats.projections += 1;
            }
            _ => unreachable!("scratch buffers share the propagator kind"),
        }
        self.prop.t1 = t_next;
        self.prop.stats.steps += 1;
        Ok(())
    }

    /// Advances to `t_end` in equal steps no longer than `dt`.
    pub fn advance_to<F>(&mut self, gen_at: &mut F, t_end: f64, dt: f64) -> Result<()>
    where
        F: FnMut(f64) -> Result<Generator>,
    {
        let t0 = self.prop.t1;
        let span = t_end - t0;
        if span < 0.0 {
            return Err(Error::invalid(format!("cannot propagate backwards from {t0} to {t_end}")));
        }
        if span == 0.0 {
            return Ok(());
        }
        let steps = (span / dt - 1e-9).ceil().max(1.0) as usize;
        let h = span / steps as f64;
        for k in 1..=steps {
            let t_next = if k == steps { t_end } else { t0 + k as f64 * h };
            self.step(gen_at, h, t_next)?;
        }
        Ok(())
    }
}

fn check_dim(gen: usize, prop: usize) -> Result<()> {
    if gen != prop {
        return Err(Error::invalid(format!("generator dimension {gen} differs from propagator {prop}")));
    }
    Ok(())
}

fn majorana(g: &Generator) -> Result<&MajoranaGenerator> {
    match g {
        Generator::Majorana(m) => Ok(m),
        Generator::Xx(_) => Err(Error::invalid("generator kind changed during propagation")),
    }
}

fn xx(g: &Generator) -> Result<&XXGenerator> {
    match g {
        Generator::Xx(h) => Ok(h),
        Generator::Majorana(_) => Err(Error::invalid("generator kind changed during propagation")),
    }
}

fn combine_real(
    o: &mut DMatrix<f64>,
    k1: &DMatrix<f64>,
    k2: &DMatrix<f64>,
    k3: &DMatrix<f64>,
    k4: &DMatrix<f64>,
    h: f64,
) {
    let c = h / 6.0;
    for ((((x, a), b), d), e) in
        o.as_mut_slice().iter_mut().zip(k1.as_slice()).zip(k2.as_slice()).zip(k3.as_slice()).zip(k4.as_slice())
    {
        *x += c * (a + 2.0 * b + 2.0 * d + e);
    }
}

fn combine_complex(
    u: &mut DMatrix<C64>,
    k1: &DMatrix<C64>,
    k2: &DMatrix<C64>,
    k3: &DMatrix<C64>,
    k4: &DMatrix<C64>,
    h: f64,
) {
    let c = h / 6.0;
    for ((((x, a), b), d), e) in
        u.as_mut_slice().iter_mut().zip(k1.as_slice()).zip(k2.as_slice()).zip(k3.as_slice()).zip(k4.as_slice())
    {
        *x += (a + b * 2.0 + d * 2.0 + e) * c;
    }
}

/// `out = x + a·k`.
fn shifted<T>(out: &mut DMatrix<T>, x: &DMatrix<T>, a: T, k: &DMatrix<T>)
where
    T: nalgebra::Scalar + Copy + std::ops::Add<Output = T> + std::ops::Mul<Output = T>,
{
    for ((o, &xv), &kv) in out.iter_mut().zip(x.iter()).zip(k.iter()) {
        *o = xv + a * kv;
    }
}

/// Propagator over `[t0, t1]` for the flow defined by `gen_at`.
pub fn evolve_propagator<F>(mut gen_at: F, t0: f64, t1: f64, dt: f64) -> Result<Propagator>
where
    F: FnMut(f64) -> Result<Generator>,
{
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::invalid(format!("dt must be positive, got {dt}")));
    }
    if t1 < t0 {
        return Err(Error::invalid(format!("t1 = {t1} precedes t0 = {t0}")));
    }
    let g0 = gen_at(t0)?;
    let kind = match g0 {
        Generator::Majorana(_) => PropagatorKind::MajoranaOrthogonal,
        Generator::Xx(_) => PropagatorKind::XxUnitary,
    };
    let mut stepper = PropagatorStepper::new(kind, g0.dim(), t0);
    stepper.advance_to(&mut gen_at, t1, dt)?;
    Ok(stepper.into_propagator())
}
