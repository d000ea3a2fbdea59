//! Library against independent references, plus the model invariants that
//! need whole runs.

mod common;

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use common::{
    classical_order_errors, dispersion, ising_generator, ising_oracle_deviation, propagator_order_ratio, ring_levels,
    schrodinger_step, small_fig2, zigzag, zigzag_wave, Kuramoto, ManyBody, Start, C,
};
use kchain_core::cosim::{classical_trajectory, make_drive, run_scenario, NetworkConfig, Scenario};
use kchain_core::experiments::{scenario_fig2, scenario_fig3};
use kchain_core::fermion::{
    analytic_dispersion, build_generator, instantaneous_spectrum, Boundary, ChainParams, DriveField, Generator,
    MajoranaGenerator, PropagatorMatrix, PropagatorStepper,
};
use kchain_core::oscillator::{
    build_all_to_all, integrate, random_initial_phases, DriveModel, InitialState, NetworkSpec, SLState,
};

fn majorana(m: &DMatrix<f64>) -> Generator {
    Generator::Majorana(MajoranaGenerator::from_matrix(0.0, m).unwrap())
}

#[test]
fn dense_flow_hamiltonian_generates_m() {
    // i[H, a_k] = Σ_n M_kn a_n, checked directly on the operators.
    let mb = ManyBody::new(3);
    let m = ising_generator(&[0.7, -1.3, 2.1], 0.9);
    let h = mb.flow_hamiltonian(&m);
    for k in 0..6 {
        let lhs = (&h * &mb.a[k] - &mb.a[k] * &h) * C::new(0.0, 1.0);
        let mut rhs = DMatrix::zeros(8, 8);
        for q in 0..6 {
            rhs += &mb.a[q] * C::new(m[(k, q)], 0.0);
        }
        assert!((lhs - rhs).norm() < 1e-12, "row {k}");
    }
    // Fermion vacuum is the all-up state.
    let vac = mb.product_state(&[true; 3]);
    assert!(mb.occupations(&vac).iter().all(|x| x.abs() < 1e-15));
    assert_eq!(mb.z_profile(&vac), vec![1.0; 3]);
}

#[test]
fn library_generator_matches_reference() {
    let g = [0.3, -2.0, 1.1, 0.0, 2.9];
    let chain = ChainParams::ising(5, 1.0, 3.0);
    let lib = build_generator(&chain, &DriveField::new(0.0, DVector::from_column_slice(&g))).unwrap().matrix();
    assert_eq!(lib, ising_generator(&g, 1.0));
}

#[test]
fn covariance_matches_dense_integration_small_chains() {
    for n in 2..=4 {
        for start in [Start::Ground, Start::Quasiparticle, Start::Neel] {
            let s = small_fig2(n, n as u64 + 10, 10.0, start);
            let dev = ising_oracle_deviation(&s, start);
            assert!(dev <= 1e-6, "n={n} {start:?}: {dev:e}");
        }
    }
}

#[test]
fn xx_amplitudes_match_dense_integration() {
    let n = 4;
    let mut s = scenario_fig3();
    s.chain = ChainParams::xx(n, 1.0, 3.0);
    s.run.t_end = 10.0;
    let traj = classical_trajectory(&s).unwrap();
    let drive = make_drive(&traj, s.chain.g_amp).unwrap();
    let psi0 = DVector::from_vec(vec![C::new(0.6, 0.0), C::new(0.0, 0.8), C::new(0.0, 0.0), C::new(0.0, 0.0)]);
    let mut stepper = PropagatorStepper::from_matrix(
        PropagatorMatrix::Complex(DMatrix::from_column_slice(n, 1, psi0.as_slice())),
        0.0,
    );
    let mut gen_at = |t: f64| build_generator(&s.chain, &drive.at(t)?);

    let (k1, k2) = match s.network {
        NetworkConfig::Zigzag { k1, k2, .. } => (k1, k2),
        _ => unreachable!(),
    };
    let (k, beta) = zigzag(n, k1, k2, -1.0);
    let net = Kuramoto { k, beta, omega: vec![s.network.omega(); n] };
    let theta0: Vec<f64> = random_initial_phases(n, s.run.seed).theta.iter().copied().collect();
    let dt = 1e-3;
    let path = net.path(&theta0, dt / 2.0, 20_000, 1);
    let mb = ManyBody::new(n);
    let ham = |th: &[f64]| {
        let h1 = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                -2.0 * 3.0 * th[i].cos()
            } else if i.abs_diff(j) == 1 {
                -2.0
            } else {
                0.0
            }
        });
        mb.hopping_hamiltonian(&h1)
    };
    let vac = mb.product_state(&[true; 4]);
    let mut psi = DVector::zeros(mb.dim());
    for j in 0..n {
        psi += mb.f[j].adjoint() * &vac * psi0[j];
    }
    let mut h_start = ham(&path[0]);
    for step in 1..=10_000 {
        let h_end = ham(&path[2 * step]);
        psi = schrodinger_step(&psi, &h_start, &ham(&path[2 * step - 1]), &h_end, dt);
        h_start = h_end;
        if step % 1000 == 0 {
            let t = step as f64 * dt;
            stepper.advance_to(&mut gen_at, t, s.run.quantum_dt).unwrap();
            let lib = stepper.propagator().complex().unwrap().column(0).map(|z| z.norm_sqr());
            for (a, b) in mb.occupations(&psi).iter().zip(lib.iter()) {
                assert!((a - b).abs() < 1e-6, "t={t}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn uniform_ring_matches_dispersion() {
    for (n, g) in [(30, 3.0), (30, -0.4), (12, 1.0), (8, 0.25)] {
        let chain = ChainParams::ising(n, 1.0, 3.0).with_boundary(Boundary::Periodic);
        let spec = instantaneous_spectrum(&build_generator(&chain, &DriveField::uniform(0.0, n, g)).unwrap()).unwrap();
        for (a, b) in spec.energies.iter().zip(ring_levels(n, g, 1.0)) {
            assert!((a - b).abs() <= 1e-8, "n={n} g={g}: {a} vs {b}");
        }
    }
    for k in [0.0, 0.3, PI / 2.0, 2.0, PI] {
        assert!((analytic_dispersion(1.7, 0.8, k) - dispersion(1.7, 0.8, k)).abs() < 1e-14);
    }
}

#[test]
fn zigzag_steady_wave_is_the_stable_branch() {
    let s = scenario_fig3();
    let n = s.chain.n;
    let (k, beta) = zigzag(n, 0.2, 0.1, -1.0);
    let net = Kuramoto { k, beta, omega: vec![0.04; n] };

    // A ring of the same network would carry θ_i = Ωt + iδ with
    // Ω = ω + K1 sin(δ + β1) + K2 sin(2δ + β2).
    let ring = |d: f64| 0.04 + 0.2 * (d - 2.0 * PI / 3.0).sin() + 0.1 * (2.0 * d - 4.0 * PI / 3.0).sin();
    assert!((ring(2.0 * PI / 3.0) - 0.04).abs() < 1e-15);
    assert!((ring(-2.0 * PI / 3.0) - (0.04 + 3f64.sqrt() / 2.0 * 0.1)).abs() < 1e-15);

    // The open chain settles on δ = +2π/3 at the natural frequency.
    let theta0: Vec<f64> = random_initial_phases(n, 1).theta.iter().copied().collect();
    let w = zigzag_wave(&net, &theta0, 0.01, 3000.0, 500.0);
    assert!((w.delta - 2.0 * PI / 3.0).abs() < 1e-6, "{}", w.delta);
    assert!((w.omega - 0.04).abs() < 1e-6, "{}", w.omega);

    // A wave started at δ = −2π/3 does not persist.
    let start: Vec<f64> = (0..n).map(|i| -2.0 * PI / 3.0 * i as f64 + 1e-3 * ((i * 7) % 5) as f64).collect();
    let w = zigzag_wave(&net, &start, 0.01, 3000.0, 500.0);
    assert!((w.delta + 2.0 * PI / 3.0).abs() > 0.1, "{}", w.delta);

    // Library integration lands on the same state.
    let mut short = s.clone();
    short.run.t_end = 3000.0;
    let traj = classical_trajectory(&short).unwrap();
    let lib = kchain_core::oscillator::wave_profile(&traj, (2500.0, 3000.0)).unwrap();
    assert!((lib.delta - 2.0 * PI / 3.0).abs() < 1e-6);
    assert!((lib.omega_eff - 0.04).abs() < 1e-6);
}

#[test]
fn mean_phase_drifts_at_mean_frequency() {
    let n = 12;
    let freqs = DVector::from_fn(n, |i, _| 0.3 + 0.05 * i as f64 - 0.01 * (i * i) as f64);
    let net = build_all_to_all(n, 0.4, 0.0).unwrap().with_freqs(freqs.clone()).unwrap();
    let init = InitialState::Phase(random_initial_phases(n, 5));
    let traj = integrate(&net, &init, 0.01, 50.0, DriveModel::Kuramoto).unwrap();
    let mean0 = traj.row(0).iter().sum::<f64>() / n as f64;
    let wbar = freqs.sum() / n as f64;
    for k in (0..traj.len()).step_by(50) {
        let mean = traj.row(k).iter().sum::<f64>() / n as f64;
        assert!((mean - mean0 - wbar * traj.time(k)).abs() <= 1e-8, "t={}", traj.time(k));
    }
}

#[test]
fn classical_rk4_is_fourth_order() {
    let errs = classical_order_errors();
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!((8.0..=32.0).contains(&ratio), "{errs:?}");
    }
}

#[test]
fn propagator_rk4_order() {
    let r = propagator_order_ratio();
    assert!(r >= 12.0, "ratio {r}");
}

#[test]
fn frozen_drive_conserves_energy() {
    for mut s in [scenario_fig2(), scenario_fig3()] {
        s.network = match s.network {
            NetworkConfig::AllToAll { drive, .. } => {
                NetworkConfig::AllToAll { k_tilde: 0.0, omega: 0.0, omega_std: 0.0, drive }
            }
            NetworkConfig::Zigzag { delay_sign, drive, .. } => {
                NetworkConfig::Zigzag { k1: 0.0, k2: 0.0, delay_sign, omega: 0.0, omega_std: 0.0, drive }
            }
        };
        s.run.t_end = 50.0;
        s.run.snapshot_every = 1.0;
        let r = run_scenario(&s).unwrap();
        let e = &r.observables.energy;
        let drift = e.iter().map(|x| (x - e[0]).abs()).fold(0.0, f64::max);
        assert!(drift <= 1e-8, "{}: {drift:e}", s.name);
    }
}

#[test]
fn xx_density_is_conserved_under_drive() {
    let mut s = scenario_fig3();
    s.run.t_end = 500.0;
    let r = run_scenario(&s).unwrap();
    assert!(r.diagnostics.max_norm_defect <= 1e-9, "{:e}", r.diagnostics.max_norm_defect);
    assert!(r.diagnostics.defect.max_step_defect <= 1e-8);
}

fn final_observables(s: &Scenario) -> Vec<f64> {
    let r = run_scenario(s).unwrap();
    let o = &r.observables;
    let mut v = o.sigma_z.last().cloned().unwrap_or_default();
    v.extend(o.density.last().cloned().unwrap_or_default());
    v.push(*o.energy.last().unwrap());
    v
}

#[test]
fn halving_quantum_dt_converges() {
    for s in [scenario_fig2(), scenario_fig3()] {
        let mut fine = s.clone();
        fine.run.quantum_dt /= 2.0;
        let a = final_observables(&s);
        let b = final_observables(&fine);
        let diff = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(diff <= 1e-6, "{}: {diff:e}", s.name);
    }
}

#[test]
fn metrics_of_reloaded_run_are_identical() {
    let mut s = scenario_fig2();
    s.run.t_end = 5.0;
    let r = run_scenario(&s).unwrap();
    let m = kchain_core::experiments::compute_metrics(&r);
    let dir = tempfile::tempdir().unwrap();
    kchain_core::io::write_run(dir.path(), &r, &m).unwrap();
    let back = kchain_core::io::load_run(dir.path()).unwrap();
    assert_eq!(kchain_core::experiments::compute_metrics(&back), m);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn stuart_landau_amplitude_settles(r0 in 1e-3f64..=10.0, k1 in 0.5f64..2.0, k2 in 0.2f64..2.0) {
        let n = 2;
        let net = NetworkSpec::new(DMatrix::zeros(n, n), DMatrix::zeros(n, n), DVector::from_element(n, 0.1)).unwrap();
        let init = InitialState::StuartLandau(SLState {
            t: 0.0,
            r: DVector::from_element(n, r0),
            theta: DVector::from_vec(vec![0.0, 1.0]),
        });
        let traj = integrate(&net, &init, 0.005, 40.0, DriveModel::StuartLandau { kappa1: k1, kappa2: k2 }).unwrap();
        let target = (k1 / (2.0 * k2)).sqrt();
        for r in traj.amplitude_row(traj.len() - 1).unwrap() {
            prop_assert!((r - target).abs() <= 1e-6, "{r} vs {target}");
        }
    }

    #[test]
    fn majorana_spectrum_pairs(g in proptest::collection::vec(-3.0f64..3.0, 2..12), j in -2.0f64..2.0) {
        let m = ising_generator(&g, j);
        let spec = instantaneous_spectrum(&majorana(&m)).unwrap().energies;
        let d = spec.len();
        for k in 0..d {
            prop_assert!((spec[k] + spec[d - 1 - k]).abs() <= 1e-9);
        }
    }
}
