use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::dynamics::{kuramoto_rhs_into, stuart_landau_rhs_into, DriveModel, PhaseState, SLState};
use super::network::NetworkSpec;
use crate::error::{Error, Result};

/// Relative tolerance used to decide whether a time sits on the grid.
const GRID_SNAP: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    Phase(PhaseState),
    StuartLandau(SLState),
}

impl InitialState {
    pub fn t(&self) -> f64 {
        match self {
            InitialState::Phase(s) => s.t,
            InitialState::StuartLandau(s) => s.t,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub integrator: String,
    pub dt: f64,
    pub seed: Option<u64>,
}

/// Oscillator phases on a uniform time grid `t0 + k·dt`, `k = 0..=steps`.
///
/// Rows are stored contiguously (`row k` = all `n` phases at `t_k`).
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTrajectory {
    t0: f64,
    dt: f64,
    n: usize,
    phases: Vec<f64>,
    amplitudes: Option<Vec<f64>>,
    pub meta: TrajectoryMeta,
}

impl PhaseTrajectory {
    /// Builds a trajectory from row-major samples. Used for synthetic inputs
    /// and for reloading stored runs.
    pub fn from_rows(
        t0: f64,
        dt: f64,
        n: usize,
        phases: Vec<f64>,
        amplitudes: Option<Vec<f64>>,
        meta: TrajectoryMeta,
    ) -> Result<Self> {
        if !(dt > 0.0) || !t0.is_finite() {
            return Err(Error::invalid("trajectory needs finite t0 and dt > 0"));
        }
        if n == 0 || phases.is_empty() || phases.len() % n != 0 {
            return Err(Error::invalid("phase rows do not match oscillator count"));
        }
        if let Some(a) = &amplitudes {
            if a.len() != phases.len() {
                return Err(Error::invalid("amplitude rows do not match phase rows"));
            }
        }
        Ok(Self { t0, dt, n, phases, amplitudes, meta })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Number of grid samples (`steps + 1`).
    pub fn len(&self) -> usize {
        self.phases.len() / self.n
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn start(&self) -> f64 {
        self.t0
    }

    pub fn end(&self) -> f64 {
        self.time(self.len() - 1)
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |k| self.time(k))
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.phases[k * self.n..(k + 1) * self.n]
    }

    pub fn amplitude_row(&self, k: usize) -> Option<&[f64]> {
        self.amplitudes.as_ref().map(|a| &a[k * self.n..(k + 1) * self.n])
    }

    pub fn has_amplitudes(&self) -> bool {
        self.amplitudes.is_some()
    }

    /// Grid index of `t` when `t` lies on the grid.
    pub fn grid_index(&self, t: f64) -> Option<usize> {
        let u = (t - self.t0) / self.dt;
        let k = u.round();
        if (u - k).abs() <= GRID_SNAP * u.abs().max(1.0) && k >= 0.0 && (k as usize) < self.len() {
            Some(k as usize)
        } else {
            None
        }
    }

    fn slope(&self, k: usize, i: usize) -> f64 {
        let m = self.len();
        let y = |k: usize| self.phases[k * self.n + i];
        if m == 1 {
            0.0
        } else if k == 0 {
            if m >= 3 {
                (-3.0 * y(0) + 4.0 * y(1) - y(2)) / (2.0 * self.dt)
            } else {
                (y(1) - y(0)) / self.dt
            }
        } else if k == m - 1 {
            if m >= 3 {
                (3.0 * y(k) - 4.0 * y(k - 1) + y(k - 2)) / (2.0 * self.dt)
            } else {
                (y(k) - y(k - 1)) / self.dt
            }
        } else {
            (y(k + 1) - y(k - 1)) / (2.0 * self.dt)
        }
    }

    /// Phases at an arbitrary time, written into `out`.
    ///
    /// Cubic Hermite interpolation with finite-difference slopes; grid points
    /// return the stored row exactly.
    pub fn sample_into(&self, t: f64, out: &mut [f64]) -> Result<()> {
        let (start, end) = (self.start(), self.end());
        let tol = GRID_SNAP * self.dt;
        if !(t >= start - tol && t <= end + tol) {
            return Err(Error::OutOfRange { t, start, end });
        }
        if let Some(k) = self.grid_index(t) {
            out.copy_from_slice(self.row(k));
            return Ok(());
        }
        let u = (t - self.t0) / self.dt;
        let k = (u.floor() as usize).min(self.len() - 2);
        let s = u - k as f64;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let (a, b) = (self.row(k), self.row(k + 1));
        for i in 0..self.n {
            out[i] = h00 * a[i] + h10 * self.dt * self.slope(k, i) + h01 * b[i] + h11 * self.dt * self.slope(k + 1, i);
        }
        Ok(())
    }

    /// Truncates the stored grid to every `stride`-th sample.
    pub fn decimate(&self, stride: usize) -> PhaseTrajectory {
        let stride = stride.max(1);
        let keep: Vec<usize> = (0..self.len()).step_by(stride).collect();
        let pick = |v: &Vec<f64>| -> Vec<f64> {
            keep.iter().flat_map(|&k| v[k * self.n..(k + 1) * self.n].iter().copied()).collect()
        };
        PhaseTrajectory {
            t0: self.t0,
            dt: self.dt * stride as f64,
            n: self.n,
            phases: pick(&self.phases),
            amplitudes: self.amplitudes.as_ref().map(pick),
            meta: self.meta.clone(),
        }
    }
}

/// Phases at time `t` (see [`PhaseTrajectory::sample_into`]).
pub fn sample_phases(traj: &PhaseTrajectory, t: f64) -> Result<DVector<f64>> {
    let mut out = DVector::zeros(traj.n());
    traj.sample_into(t, out.as_mut_slice())?;
    Ok(out)
}

struct Rk4Scratch {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4Scratch {
    fn new(dim: usize) -> Self {
        Self { k1: vec![0.0; dim], k2: vec![0.0; dim], k3: vec![0.0; dim], k4: vec![0.0; dim], tmp: vec![0.0; dim] }
    }

    fn step<F: FnMut(&[f64], &mut [f64])>(&mut self, y: &mut [f64], dt: f64, mut f: F) {
        f(y, &mut self.k1);
        for i in 0..y.len() {
            self.tmp[i] = y[i] + 0.5 * dt * self.k1[i];
        }
        f(&self.tmp, &mut self.k2);
        for i in 0..y.len() {
            self.tmp[i] = y[i] + 0.5 * dt * self.k2[i];
        }
        f(&self.tmp, &mut self.k3);
        for i in 0..y.len() {
            self.tmp[i] = y[i] + dt * self.k3[i];
        }
        f(&self.tmp, &mut self.k4);
        for i in 0..y.len() {
            y[i] += dt / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

/// Fixed-step classic RK4 over `[initial.t, t_end]`, storing every step.
///
/// The grid has `ceil((t_end − t0)/dt)` steps, so it ends at or just past `t_end`.
pub fn integrate(
    net: &NetworkSpec,
    initial: &InitialState,
    dt: f64,
    t_end: f64,
    model: DriveModel,
) -> Result<PhaseTrajectory> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::invalid(format!("dt must be positive, got {dt}")));
    }
    let t0 = initial.t();
    if !(t_end > t0) {
        return Err(Error::invalid(format!("t_end {t_end} must exceed start time {t0}")));
    }
    model.validate()?;
    let n = net.n();
    let steps = ((t_end - t0) / dt - GRID_SNAP).ceil().max(1.0) as usize;

    let (mut y, with_amp) = match (initial, model) {
        (InitialState::Phase(s), DriveModel::Kuramoto) => {
            if s.theta.len() != n {
                return Err(Error::invalid("initial phases do not match network size"));
            }
            (s.theta.as_slice().to_vec(), false)
        }
        (InitialState::StuartLandau(s), DriveModel::StuartLandau { .. }) => {
            if s.theta.len() != n || s.r.len() != n {
                return Err(Error::invalid("initial Stuart-Landau state does not match network size"));
            }
            if s.r.iter().any(|&r| r < 0.0) {
                return Err(Error::invalid("amplitudes must be nonnegative"));
            }
            let mut y = s.r.as_slice().to_vec();
            y.extend_from_slice(s.theta.as_slice());
            (y, true)
        }
        _ => return Err(Error::invalid("initial state does not match the drive model")),
    };
    if y.iter().any(|x| !x.is_finite()) {
        return Err(Error::IntegrationDiverged { t: t0 });
    }

    let mut phases = Vec::with_capacity((steps + 1) * n);
    let mut amplitudes = with_amp.then(|| Vec::with_capacity((steps + 1) * n));
    let push = |y: &[f64], phases: &mut Vec<f64>, amplitudes: &mut Option<Vec<f64>>| {
        if let Some(a) = amplitudes {
            a.extend_from_slice(&y[..n]);
            phases.extend_from_slice(&y[n..]);
        } else {
            phases.extend_from_slice(y);
        }
    };
    push(&y, &mut phases, &mut amplitudes);

    let mut scratch = Rk4Scratch::new(y.len());
    for k in 1..=steps {
        match model {
            DriveModel::Kuramoto => {
                scratch.step(&mut y, dt, |th, out| kuramoto_rhs_into(net, th, out));
            }
            DriveModel::StuartLandau { kappa1, kappa2 } => {
                scratch.step(&mut y, dt, |s, out| stuart_landau_rhs_into(net, kappa1, kappa2, s, out));
            }
        }
        if y.iter().any(|x| !x.is_finite()) {
            return Err(Error::IntegrationDiverged { t: t0 + k as f64 * dt });
        }
        push(&y, &mut phases, &mut amplitudes);
    }

    PhaseTrajectory::from_rows(
        t0,
        dt,
        n,
        phases,
        amplitudes,
        TrajectoryMeta { integrator: "rk4".into(), dt, seed: None },
    )
}
