//! Reference implementations written from the model definitions alone, plus
//! the glue that lines them up against the library.
#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};

use kchain_core::cosim::{classical_trajectory, make_drive, run_scenario, InitialSelector, Scenario};
use kchain_core::experiments::scenario_fig2;
use kchain_core::fermion::{
    build_generator, evolve_covariance, evolve_propagator, sigma_z_profile, ChainParams, CovarianceMatrix, DriveField,
    PropagatorKind, PropagatorStepper,
};
use kchain_core::oscillator::{build_all_to_all, integrate, random_initial_phases, DriveModel, InitialState};

pub type C = Complex<f64>;

const I: C = C { re: 0.0, im: 1.0 };

// ---------------------------------------------------------------- oscillators

/// Couplings and delays `(K, β)`: every pair coupled with `k`, no delay.
pub fn all_to_all(n: usize, k: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    (DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { k }), DMatrix::zeros(n, n))
}

/// `i` listens to `i+1` (k1) and `i+2` (k2) with delay `sign·2rπ/3`.
pub fn zigzag(n: usize, k1: f64, k2: f64, sign: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut k = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, n);
    for i in 0..n {
        if i + 1 < n {
            k[(i, i + 1)] = k1;
            b[(i, i + 1)] = sign * 2.0 * PI / 3.0;
        }
        if i + 2 < n {
            k[(i, i + 2)] = k2;
            b[(i, i + 2)] = sign * 4.0 * PI / 3.0;
        }
    }
    (k, b)
}

pub struct Kuramoto {
    pub k: DMatrix<f64>,
    pub beta: DMatrix<f64>,
    pub omega: Vec<f64>,
}

impl Kuramoto {
    pub fn rhs(&self, th: &[f64]) -> Vec<f64> {
        let n = th.len();
        (0..n)
            .map(|i| {
                let mut s = self.omega[i];
                for j in 0..n {
                    let kij = self.k[(i, j)];
                    if kij != 0.0 {
                        s += kij * (th[j] - th[i] + self.beta[(i, j)]).sin();
                    }
                }
                s
            })
            .collect()
    }

    pub fn step(&self, th: &mut [f64], dt: f64) {
        let add = |y: &[f64], k: &[f64], h: f64| -> Vec<f64> { y.iter().zip(k).map(|(a, b)| a + h * b).collect() };
        let k1 = self.rhs(th);
        let k2 = self.rhs(&add(th, &k1, dt / 2.0));
        let k3 = self.rhs(&add(th, &k2, dt / 2.0));
        let k4 = self.rhs(&add(th, &k3, dt));
        for i in 0..th.len() {
            th[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }

    /// States after `0, every, 2·every, …` steps up to `steps`.
    pub fn path(&self, theta0: &[f64], dt: f64, steps: usize, every: usize) -> Vec<Vec<f64>> {
        let mut th = theta0.to_vec();
        let mut out = vec![th.clone()];
        for s in 1..=steps {
            self.step(&mut th, dt);
            if s % every == 0 {
                out.push(th.clone());
            }
        }
        out
    }
}

/// Circular mean of `θ_{i+1} − θ_i` and the mean phase.
pub fn wave_state(th: &[f64]) -> (f64, f64) {
    let (mut c, mut s) = (0.0, 0.0);
    for w in th.windows(2) {
        c += (w[1] - w[0]).cos();
        s += (w[1] - w[0]).sin();
    }
    (s.atan2(c), th.iter().sum::<f64>() / th.len() as f64)
}

/// Slope and intercept of the least-squares line.
pub fn line_fit(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let b = sxy / sxx;
    (b, my - b * mx)
}

pub struct WaveCheck {
    pub delta: f64,
    pub omega: f64,
    /// Spread of the neighbour differences at the end.
    pub spread: f64,
}

/// Integrates the zig-zag network to `t_end` and reads off the final wave.
/// The frequency is the mean-phase slope over the last `tail` time units.
pub fn zigzag_wave(net: &Kuramoto, theta0: &[f64], dt: f64, t_end: f64, tail: f64) -> WaveCheck {
    let steps = (t_end / dt).round() as usize;
    let every = (1.0 / dt).round() as usize;
    let path = net.path(theta0, dt, steps, every);
    let t = |k: usize| (k * every) as f64 * dt;
    let pts: Vec<(f64, f64)> =
        (0..path.len()).filter(|&k| t(k) >= t_end - tail).map(|k| (t(k), wave_state(&path[k]).1)).collect();
    let last = path.last().unwrap();
    let (delta, _) = wave_state(last);
    let spread = last
        .windows(2)
        .map(|w| {
            let d = w[1] - w[0] - delta;
            d.sin().atan2(d.cos()).abs()
        })
        .fold(0.0, f64::max);
    WaveCheck { delta, omega: line_fit(&pts).0, spread }
}

// ------------------------------------------------------------------ fermions

/// `M` for the open Ising chain: `M_{2i−1,2i} = g_i`, `M_{2(i−1),2i−1} = J`,
/// antisymmetric (1-based indices).
pub fn ising_generator(g: &[f64], jx: f64) -> DMatrix<f64> {
    let n = g.len();
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        m[(2 * i, 2 * i + 1)] = g[i];
        m[(2 * i + 1, 2 * i)] = -g[i];
        if i > 0 {
            m[(2 * i, 2 * i - 1)] = -jx;
            m[(2 * i - 1, 2 * i)] = jx;
        }
    }
    m
}

/// `2·sqrt(g² + J² + 2gJ cos k)`.
pub fn dispersion(g: f64, j: f64, k: f64) -> f64 {
    2.0 * (g * g + j * j + 2.0 * g * j * k.cos()).sqrt()
}

/// Sorted `±ε/2` over `k = 2πm/n`, the levels of `i·M` for a uniform periodic chain.
pub fn ring_levels(n: usize, g: f64, j: f64) -> Vec<f64> {
    let mut e: Vec<f64> = (0..n)
        .flat_map(|m| {
            let x = dispersion(g, j, 2.0 * PI * m as f64 / n as f64) / 2.0;
            [x, -x]
        })
        .collect();
    e.sort_by(f64::total_cmp);
    e
}

fn kron(a: &DMatrix<C>, b: &DMatrix<C>) -> DMatrix<C> {
    a.kronecker(b)
}

fn pauli() -> [DMatrix<C>; 4] {
    let z = C::new(0.0, 0.0);
    let o = C::new(1.0, 0.0);
    [
        DMatrix::from_row_slice(2, 2, &[o, z, z, o]),
        DMatrix::from_row_slice(2, 2, &[z, o, o, z]),
        DMatrix::from_row_slice(2, 2, &[z, -I, I, z]),
        DMatrix::from_row_slice(2, 2, &[o, z, z, -o]),
    ]
}

/// Dense operators on `n` spins; site 0 is the leftmost tensor factor.
/// Basis state bit `j` set means spin `j` is down.
pub struct ManyBody {
    pub n: usize,
    /// Majoranas `a_{2j} = (∏_{k<j} Z_k) X_j`, `a_{2j+1} = (∏_{k<j} Z_k) Y_j`.
    pub a: Vec<DMatrix<C>>,
    pub z: Vec<DMatrix<C>>,
    /// `f_j = (a_{2j} + i a_{2j+1}) / 2`.
    pub f: Vec<DMatrix<C>>,
}

impl ManyBody {
    pub fn new(n: usize) -> Self {
        let [id, x, y, zz] = pauli();
        let site = |j: usize, op: &DMatrix<C>, string: bool| {
            let mut acc = DMatrix::from_element(1, 1, C::new(1.0, 0.0));
            for k in 0..n {
                let f = if k == j {
                    op
                } else if k < j && string {
                    &zz
                } else {
                    &id
                };
                acc = kron(&acc, f);
            }
            acc
        };
        let mut a = Vec::new();
        for j in 0..n {
            a.push(site(j, &x, true));
            a.push(site(j, &y, true));
        }
        let z = (0..n).map(|j| site(j, &zz, false)).collect();
        let f = (0..n).map(|j| (&a[2 * j] + &a[2 * j + 1] * I) * C::new(0.5, 0.0)).collect();
        ManyBody { n, a, z, f }
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    /// `H = (i/4) Σ_mn M_mn a_m a_n`, whose Heisenberg flow is `ȧ = M a`.
    pub fn flow_hamiltonian(&self, m: &DMatrix<f64>) -> DMatrix<C> {
        let d = self.dim();
        let mut h = DMatrix::zeros(d, d);
        for p in 0..m.nrows() {
            for q in 0..m.ncols() {
                if p != q && m[(p, q)] != 0.0 {
                    h += &self.a[p] * &self.a[q] * (I * (0.25 * m[(p, q)]));
                }
            }
        }
        h
    }

    /// `H = Σ_ij h_ij f_i† f_j`.
    pub fn hopping_hamiltonian(&self, h1: &DMatrix<f64>) -> DMatrix<C> {
        let d = self.dim();
        let mut h = DMatrix::zeros(d, d);
        for i in 0..self.n {
            for j in 0..self.n {
                if h1[(i, j)] != 0.0 {
                    h += self.f[i].adjoint() * &self.f[j] * C::new(h1[(i, j)], 0.0);
                }
            }
        }
        h
    }

    pub fn expect(&self, op: &DMatrix<C>, psi: &DVector<C>) -> C {
        psi.dotc(&(op * psi))
    }

    /// `Γ_mn = (i/2)⟨[a_m, a_n]⟩`.
    pub fn covariance(&self, psi: &DVector<C>) -> DMatrix<f64> {
        let d = 2 * self.n;
        DMatrix::from_fn(d, d, |p, q| {
            let c = &self.a[p] * &self.a[q] - &self.a[q] * &self.a[p];
            (I * 0.5 * self.expect(&c, psi)).re
        })
    }

    pub fn z_profile(&self, psi: &DVector<C>) -> Vec<f64> {
        self.z.iter().map(|z| self.expect(z, psi).re).collect()
    }

    pub fn occupations(&self, psi: &DVector<C>) -> Vec<f64> {
        self.f.iter().map(|f| self.expect(&(f.adjoint() * f), psi).re).collect()
    }

    /// Product state with `⟨Z_j⟩ = up[j] ? 1 : −1`.
    pub fn product_state(&self, up: &[bool]) -> DVector<C> {
        let idx =
            up.iter().enumerate().fold(0usize, |acc, (j, u)| if *u { acc } else { acc | (1 << (self.n - 1 - j)) });
        let mut v = DVector::zeros(self.dim());
        v[idx] = C::new(1.0, 0.0);
        v
    }
}

/// Eigenpairs of a Hermitian matrix, ascending.
pub fn hermitian_eigen(h: &DMatrix<C>) -> (Vec<f64>, Vec<DVector<C>>) {
    let e = SymmetricEigen::new(h.clone());
    let mut order: Vec<usize> = (0..e.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| e.eigenvalues[a].total_cmp(&e.eigenvalues[b]));
    (
        order.iter().map(|&k| e.eigenvalues[k]).collect(),
        order.iter().map(|&k| e.eigenvectors.column(k).into_owned()).collect(),
    )
}

/// One RK4 step of `i ψ̇ = H ψ` given `H` at the start, midpoint and end.
pub fn schrodinger_step(psi: &DVector<C>, h0: &DMatrix<C>, hm: &DMatrix<C>, h1: &DMatrix<C>, dt: f64) -> DVector<C> {
    let f = |h: &DMatrix<C>, v: &DVector<C>| (h * v) * (-I);
    let k1 = f(h0, psi);
    let k2 = f(hm, &(psi + &k1 * C::new(dt / 2.0, 0.0)));
    let k3 = f(hm, &(psi + &k2 * C::new(dt / 2.0, 0.0)));
    let k4 = f(h1, &(psi + &k3 * C::new(dt, 0.0)));
    psi + (k1 + k2 * C::new(2.0, 0.0) + k3 * C::new(2.0, 0.0) + k4) * C::new(dt / 6.0, 0.0)
}

// ---------------------------------------------------------------- comparison

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Start {
    Ground,
    Quasiparticle,
    /// Alternating up/down product state.
    Neel,
}

/// Small all-to-all driven Ising chain with the fig2 couplings.
pub fn small_fig2(n: usize, seed: u64, t_end: f64, start: Start) -> Scenario {
    let mut s = scenario_fig2();
    s.chain = ChainParams::ising(n, s.chain.jx, s.chain.g_amp);
    s.run.t_end = t_end;
    s.run.seed = seed;
    s.run.initial_state = match start {
        Start::Quasiparticle => InitialSelector::QuasiparticleMaxIpr,
        _ => InitialSelector::Ground,
    };
    s
}

/// Largest `|⟨σ^z_j⟩|` difference between the library and the dense
/// integrator on the snapshot grid of `s` (fig2-style all-to-all network).
pub fn ising_oracle_deviation(s: &Scenario, start: Start) -> f64 {
    let n = s.chain.n;
    let (g_amp, jx) = (s.chain.g_amp, s.chain.jx);
    let (k_tilde, omega) = match s.network {
        kchain_core::cosim::NetworkConfig::AllToAll { k_tilde, omega, .. } => (k_tilde, omega),
        _ => panic!("all-to-all network expected"),
    };

    // Library side.
    let lib: Vec<Vec<f64>> = match start {
        Start::Ground | Start::Quasiparticle => run_scenario(s).unwrap().observables.sigma_z,
        Start::Neel => {
            let traj = classical_trajectory(s).unwrap();
            let drive = make_drive(&traj, g_amp).unwrap();
            let mut gamma = DMatrix::zeros(2 * n, 2 * n);
            for j in 0..n {
                let sz = if j % 2 == 0 { 1.0 } else { -1.0 };
                gamma[(2 * j, 2 * j + 1)] = -sz;
                gamma[(2 * j + 1, 2 * j)] = sz;
            }
            let gamma0 = CovarianceMatrix::new(gamma).unwrap();
            let mut stepper = PropagatorStepper::new(PropagatorKind::MajoranaOrthogonal, 2 * n, 0.0);
            let mut gen_at = |t: f64| build_generator(&s.chain, &drive.at(t)?);
            s.snapshot_times()
                .iter()
                .map(|&t| {
                    if t > 0.0 {
                        stepper.advance_to(&mut gen_at, t, s.run.quantum_dt).unwrap();
                    }
                    sigma_z_profile(&evolve_covariance(&gamma0, stepper.propagator()).unwrap())
                })
                .collect()
        }
    };

    // Dense side: own phase integration on half steps, own generator.
    let dt = 1e-3;
    let steps = (s.run.t_end / dt).round() as usize;
    let per_snapshot = (s.run.snapshot_every / dt).round() as usize;
    let (k, beta) = all_to_all(n, k_tilde);
    let net = Kuramoto { k, beta, omega: vec![omega; n] };
    let theta0: Vec<f64> = random_initial_phases(n, s.run.seed).theta.iter().copied().collect();
    let path = net.path(&theta0, dt / 2.0, 2 * steps, 1);
    let mb = ManyBody::new(n);
    let ham = |th: &[f64]| {
        let g: Vec<f64> = th.iter().map(|x| g_amp * x.cos()).collect();
        mb.flow_hamiltonian(&ising_generator(&g, jx))
    };

    let h0 = ham(&path[0]);
    let (levels, vecs) = hermitian_eigen(&h0);
    let mut psi = match start {
        Start::Ground => vecs[0].clone(),
        Start::Quasiparticle => {
            // Library's chosen mode, located by its excitation energy.
            let r = run_scenario(s).unwrap();
            let mode = r.diagnostics.initial.index.unwrap();
            let g0: Vec<f64> = path[0].iter().map(|x| g_amp * x.cos()).collect();
            let im = ising_generator(&g0, jx).map(|x| C::new(0.0, x));
            let (eps, _) = hermitian_eigen(&im);
            let target = levels[0] + eps[n + mode];
            let best = (0..levels.len())
                .min_by(|&a, &b| (levels[a] - target).abs().total_cmp(&(levels[b] - target).abs()))
                .unwrap();
            vecs[best].clone()
        }
        Start::Neel => mb.product_state(&(0..n).map(|j| j % 2 == 0).collect::<Vec<_>>()),
    };

    let mut worst: f64 = 0.0;
    let mut compare = |psi: &DVector<C>, snap: usize| {
        for (a, b) in mb.z_profile(psi).iter().zip(&lib[snap]) {
            worst = worst.max((a - b).abs());
        }
    };
    compare(&psi, 0);
    let mut h_start = h0;
    for step in 1..=steps {
        let hm = ham(&path[2 * step - 1]);
        let h_end = ham(&path[2 * step]);
        psi = schrodinger_step(&psi, &h_start, &hm, &h_end, dt);
        h_start = h_end;
        if step % per_snapshot == 0 {
            compare(&psi, step / per_snapshot);
        }
    }
    worst
}

// ------------------------------------------------------------- step orders

/// Final-state error of the library phase integrator at dt = 0.02, 0.01, 0.005
/// against a fine reference, on a strongly heterogeneous network.
pub fn classical_order_errors() -> Vec<f64> {
    let n = 6;
    let freqs = DVector::from_fn(n, |i, _| i as f64);
    let net = build_all_to_all(n, 2.0, 0.0).unwrap().with_freqs(freqs).unwrap();
    let init = InitialState::Phase(random_initial_phases(n, 2));
    let end = |dt: f64| {
        let t = integrate(&net, &init, dt, 2.0, DriveModel::Kuramoto).unwrap();
        DVector::from_column_slice(t.row(t.len() - 1))
    };
    let reference = end(0.0003125);
    [0.02, 0.01, 0.005].iter().map(|&dt| (end(dt) - &reference).amax()).collect()
}

/// Propagator error ratio err(0.02)/err(0.01) for an Ising chain under a
/// closed-form drive `θ_i = θ_i(0) + ω_i t`.
pub fn propagator_order_ratio() -> f64 {
    let n = 10;
    let chain = ChainParams::ising(n, 1.0, 3.0);
    let theta0 = random_initial_phases(n, 3).theta;
    let gen_at = |t: f64| {
        let th: Vec<f64> = (0..n).map(|i| theta0[i] + (0.5 + 0.3 * i as f64) * t).collect();
        build_generator(&chain, &DriveField::from_phases(t, chain.g_amp, &th))
    };
    let o = |dt: f64| evolve_propagator(gen_at, 0.0, 2.0, dt).unwrap().real().unwrap().clone();
    let reference = o(0.00125);
    (o(0.02) - &reference).amax() / (o(0.01) - &reference).amax()
}
