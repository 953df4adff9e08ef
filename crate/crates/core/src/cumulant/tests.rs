// SPDX-License-Identifier: Apache-2.0

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::algebra::{expectation, reference_rhs, tracked_operators, DensityOracle, Generator, WickOracle};
use super::*;
use crate::exact;
use crate::model::random_couplings;
use crate::ode::uniform_grid;
use crate::sector::BasisTag;

fn random_hermitian_rho(dim: usize, seed: u64) -> DensityMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rho = DensityMatrix::zeros(dim, BasisTag::Product);
    for a in 0..dim {
        for b in a..dim {
            let v = if a == b {
                Complex64::new(rng.gen_range(0.0..1.0), 0.0)
            } else {
                Complex64::new(rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2))
            };
            rho.set(a, b, v);
            rho.set(b, a, v.conj());
        }
    }
    let tr = rho.trace().re;
    rho.entries.iter_mut().for_each(|v| *v /= tr);
    rho
}

fn random_state(n: usize, seed: u64) -> CumulantState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = CumulantState::zeros(n);
    s.s_z = rng.gen_range(-0.5..0.5);
    for v in &mut s.chi {
        *v = Complex64::new(rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3));
    }
    for m in [&mut s.gamma_plus, &mut s.gamma_minus] {
        for i in 0..n {
            for j in i..n {
                let v = if i == j {
                    Complex64::new(rng.gen_range(0.0..1.0), 0.0)
                } else {
                    Complex64::new(rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3))
                };
                m[i * n + j] = v;
                m[j * n + i] = v.conj();
            }
        }
    }
    s
}

fn max_diff(a: &CumulantState, b: &CumulantState) -> f64 {
    let mut d = (a.s_z - b.s_z).abs();
    for (x, y) in a.chi.iter().zip(&b.chi).chain(a.gamma_plus.iter().zip(&b.gamma_plus)).chain(a.gamma_minus.iter().zip(&b.gamma_minus)) {
        d = d.max((x - y).norm());
    }
    d
}

fn generator(profile: &CouplingProfile, omega: f64, gamma: f64) -> Generator {
    Generator { g: profile.g(), couplings: profile.couplings().to_vec(), omega_s: omega, gamma_r: gamma }
}

#[test]
fn heisenberg_generator_matches_master_equation() {
    let n = 3;
    let profile = random_couplings::<f64>(n, 0.2, 5).unwrap();
    let (omega, gamma) = (0.37, 0.81);
    let rho = random_hermitian_rho(1 << (n + 1), 11);
    let h = exact::build_hamiltonian(&profile, omega, 14).unwrap();
    let drho = exact::lindblad_rhs(&rho, &h, gamma).unwrap();
    let gen = generator(&profile, omega, gamma);
    for (t, o) in tracked_operators(n) {
        let direct = expectation(&o, &DensityOracle { rho: &drho }).unwrap();
        let heis = gen.derivative(&o, &DensityOracle { rho: &rho }).unwrap();
        assert!((direct - heis).norm() < 1e-13, "{t}: {direct} vs {heis}");
    }
}

#[test]
fn fast_rhs_matches_symbolic_closure() {
    for (n, seed) in [(1, 1), (2, 2), (4, 3), (5, 4)] {
        let profile = random_couplings::<f64>(n, 0.2, seed).unwrap();
        let state = random_state(n, 100 + seed);
        let params = SystemParams::new(0.9, DetuningPolicy::Fixed(0.3)).unwrap();
        let fast = cumulant_rhs(&state, &profile, &params, 0.3).unwrap();
        let slow = reference_rhs(&generator(&profile, 0.3, 0.9), &WickOracle { state: &state }).unwrap();
        assert!(max_diff(&fast, &slow) < 1e-13, "n = {n}: {}", max_diff(&fast, &slow));
    }
}

#[test]
fn single_nucleus_closure_is_exact() {
    let profile = random_couplings::<f64>(1, 0.2, 1).unwrap();
    let (omega, gamma) = (0.2, 1.3);
    let rho = random_hermitian_rho(4, 3);
    let h = exact::build_hamiltonian(&profile, omega, 14).unwrap();
    let drho = exact::lindblad_rhs(&rho, &h, gamma).unwrap();
    let params = SystemParams::new(gamma, DetuningPolicy::Fixed(omega)).unwrap();
    let state = CumulantState::from_density(&rho, 1).unwrap();
    let fast = cumulant_rhs(&state, &profile, &params, omega).unwrap();
    let exact_d = CumulantState::from_density(&drho, 1).unwrap();
    assert!(max_diff(&fast, &exact_d) < 1e-13);
}

#[test]
fn bookkeeping_holds_algebraically() {
    let profile = random_couplings::<f64>(6, 0.1, 8).unwrap();
    let params = SystemParams::new(0.7, DetuningPolicy::Compensated(0.5)).unwrap();
    let mut sys = cumulant_system(&profile, &params).unwrap();
    let y = random_state(6, 9).pack();
    let mut dy = vec![Complex64::new(0.0, 0.0); y.len()];
    sys.evaluate(&y, &mut dy);
    assert!(sys.bookkeeping_residual(&y, &dy) < 1e-14);
    let d = sys.state(&dy);
    for i in 0..6 {
        for j in 0..6 {
            assert_eq!(d.gp(i, j), d.gp(j, i).conj());
            assert_eq!(d.gm(i, j), d.gm(j, i).conj());
        }
    }
}

#[test]
fn dark_configuration_is_stationary() {
    let profile = random_couplings::<f64>(5, 0.2, 2).unwrap();
    let params = SystemParams::new(1.0, DetuningPolicy::Fixed(0.5)).unwrap();
    let dark = init_cumulant(&profile, -1.0, InitialStateKind::Product).unwrap();
    let d = cumulant_rhs(&dark, &profile, &params, 0.5).unwrap();
    assert!(max_diff(&d, &CumulantState::zeros(5)) < 1e-15);
}

#[test]
fn decoupled_electron_relaxes() {
    let n = 3;
    let mut sys = CumulantSystem::new(0.0, vec![1.0 / 3f64.sqrt(); n], 2.0, Splitting::Fixed(0.1));
    let mut s = random_state(n, 4);
    s.s_z = 0.5;
    let y = s.pack();
    let mut dy = vec![Complex64::new(0.0, 0.0); y.len()];
    sys.evaluate(&y, &mut dy);
    let d = sys.state(&dy);
    assert!((d.s_z + 2.0).abs() < 1e-15);
    assert!(d.gamma_plus.iter().all(|v| v.norm() == 0.0));
}

#[test]
fn initial_states() {
    let profile = random_couplings::<f64>(4, 0.2, 1).unwrap();
    let a = init_cumulant(&profile, 1.0, InitialStateKind::Product).unwrap();
    let b = init_cumulant(&profile, 1.0, InitialStateKind::DickeMixture).unwrap();
    assert_eq!(a, b);
    for i in 0..4 {
        for j in 0..4 {
            assert_eq!(a.gp(i, j).re, if i == j { 1.0 } else { 0.0 });
        }
    }
    assert_eq!(a.s_z, -0.5);
    let dark = init_cumulant(&profile, -1.0, InitialStateKind::Product).unwrap();
    assert!(dark.gamma_plus.iter().all(|v| v.norm() == 0.0));
    assert!(init_cumulant(&profile, 1.5, InitialStateKind::Product).is_err());
}

#[test]
fn dicke_mixture_matches_brute_force() {
    let n = 10;
    let profile = crate::model::homogeneous_couplings::<f64>(n).unwrap();
    let s = init_cumulant(&profile, 0.6, InitialStateKind::DickeMixture).unwrap();
    let rho = crate::states::dicke_mixture(n, 0.6).unwrap();
    let cov = crate::states::covariance(&rho, n);
    let g = profile.couplings();
    let brute: f64 = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| g[i] * g[j] * cov[i * n + j].re).sum();
    assert!((s.a_plus_minus(g) - brute).abs() < 1e-6, "{} vs {brute}", s.a_plus_minus(g));
    assert!((s.gp(0, 0).re - cov[0].re).abs() < 1e-10);
    assert!((s.gp(0, 1).re - cov[1].re).abs() < 1e-10);
}

#[test]
fn single_nucleus_run_matches_exact() {
    let profile = random_couplings::<f64>(1, 0.2, 1).unwrap();
    let params = SystemParams::for_epsilon(0.7, 1.0, true).unwrap();
    let grid = uniform_grid(30.0, 150);
    let tol = Tolerances::new(1e-10, 1e-12);
    let rho0 = exact::product_state(1, 1.0);
    let ex = exact::evolve(&rho0, &profile, &params, &grid, &crate::propagate::RunOptions { tolerances: tol, ..Default::default() }).unwrap();
    let s0 = init_cumulant(&profile, 1.0, InitialStateKind::Product).unwrap();
    let cu = evolve_cumulant(&s0, &profile, &params, &grid, &CumulantOptions { tolerances: tol, ..Default::default() }).unwrap();
    assert!(ex.series.intensity_sup_distance(&cu.series).unwrap() < 1e-6);
    for (a, b) in ex.series.omega_s.iter().zip(&cu.series.omega_s) {
        assert!((a - b).abs() < 1e-6);
    }
}

#[test]
fn independent_reference_stays_uncorrelated() {
    let profile = random_couplings::<f64>(6, 0.3, 3).unwrap();
    let params = SystemParams::for_epsilon(0.7, 1.0, true).unwrap();
    let s0 = init_cumulant(&profile, 1.0, InitialStateKind::Product).unwrap();
    let grid = uniform_grid(20.0, 40);
    let run = independent_reference(&s0, &profile, &params, &grid, &CumulantOptions::default()).unwrap();
    let f = &run.final_state;
    assert!((0..6).all(|i| (0..6).all(|j| i == j || f.gp(i, j).norm() == 0.0)));
    assert!(run.max_bookkeeping_residual < 1e-12);
}

#[test]
fn snapshots_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let s = random_state(3, 1);
    let p = dir.path().join("g.bin");
    write_snapshot(&p, 1.25, &s).unwrap();
    let (t, n, data) = read_snapshot(&p).unwrap();
    assert_eq!((t, n), (1.25, 3));
    assert_eq!(data, s.gamma_plus);
}

#[test]
fn anisotropic_profile_rejected() {
    let p = random_couplings::<f64>(2, 0.2, 1).unwrap().with_anisotropic(vec![[[0.0; 3]; 3]; 2]).unwrap();
    let params = SystemParams::new(1.0, DetuningPolicy::Fixed(0.0)).unwrap();
    assert!(matches!(cumulant_system(&p, &params), Err(Error::Anisotropic)));
}
