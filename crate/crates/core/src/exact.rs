// SPDX-License-Identifier: Apache-2.0

//! Full master equation for the two-level electron plus `N` spin-1/2 nuclei
//! in the product basis.

use num_complex::Complex64;

use crate::conventions::{electron_up, nucleus_bit, nucleus_up, z_value};
use crate::error::{Error, Result};
use crate::model::{CouplingProfile, DetuningPolicy, SystemParams};
use crate::propagate::{propagate, RunOptions, RunOutput};
use crate::sector::{Basis, BasisTag, BlockLindblad, DensityMatrix, Drive, LindbladSpec};
use crate::sparse::Csr;

pub const DEFAULT_N_MAX: usize = 14;

type Triplets = Vec<(usize, usize, Complex64)>;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn product_dim(n: usize) -> usize {
    1usize << (n + 1)
}

fn check_capacity(n: usize, n_max: usize) -> Result<()> {
    if n > n_max {
        Err(Error::Capacity { solver: "exact", n, limit: n_max })
    } else {
        Ok(())
    }
}

/// Action of a spin-1/2 Cartesian component (0 = x, 1 = y, 2 = z) on `|up>` or `|down>`.
fn cartesian(component: usize, up: bool) -> (bool, Complex64) {
    match (component, up) {
        (0, u) => (!u, c(0.5)),
        (1, true) => (false, Complex64::new(0.0, 0.5)),
        (1, false) => (true, Complex64::new(0.0, -0.5)),
        (_, u) => (u, c(z_value(u))),
    }
}

/// Static Hamiltonian triplets: flip-flop, `g A^z S^z` and anisotropic corrections.
fn hamiltonian_triplets(profile: &CouplingProfile) -> Triplets {
    let n = profile.n();
    let g = profile.g();
    let gi = profile.couplings();
    let mut trip = Vec::new();
    for s in 0..product_dim(n) {
        let ze = z_value(electron_up(s));
        let az: f64 = (0..n).map(|i| gi[i] * z_value(nucleus_up(s, i))).sum();
        trip.push((s, s, c(g * az * ze)));
        // (g/2) A^+ S^- : electron up -> down, nucleus i down -> up.
        if electron_up(s) {
            for i in 0..n {
                if !nucleus_up(s, i) {
                    let t = (s & !1) | (1 << nucleus_bit(i));
                    trip.push((t, s, c(0.5 * g * gi[i])));
                    trip.push((s, t, c(0.5 * g * gi[i])));
                }
            }
        }
    }
    if let Some(tensors) = profile.anisotropic() {
        for s in 0..product_dim(n) {
            for (i, t) in tensors.iter().enumerate() {
                for (a, row) in t.iter().enumerate() {
                    for (b, &coef) in row.iter().enumerate() {
                        if coef == 0.0 {
                            continue;
                        }
                        let (e_up, ae) = cartesian(a, electron_up(s));
                        let (n_up, an) = cartesian(b, nucleus_up(s, i));
                        let mut target = s & !1 & !(1 << nucleus_bit(i));
                        if e_up {
                            target |= 1;
                        }
                        if n_up {
                            target |= 1 << nucleus_bit(i);
                        }
                        trip.push((target, s, ae * an * coef));
                    }
                }
            }
        }
    }
    trip
}

/// `H = (g/2)(A^+S^- + A^-S^+) + g A^z S^z + omega_S S^z` (plus anisotropic terms) as CSR.
pub fn build_hamiltonian(profile: &CouplingProfile, omega_s: f64, n_max: usize) -> Result<Csr> {
    check_capacity(profile.n(), n_max)?;
    let mut trip = hamiltonian_triplets(profile);
    for s in 0..product_dim(profile.n()) {
        trip.push((s, s, c(omega_s * z_value(electron_up(s)))));
    }
    let dim = product_dim(profile.n());
    let h = Csr::from_triplets(dim, dim, trip);
    debug_assert!(hermiticity_defect(&h) < 1e-14);
    Ok(h)
}

pub fn hermiticity_defect(h: &Csr) -> f64 {
    let a = h.to_dense();
    let b = h.adjoint().to_dense();
    a.iter().zip(&b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn a_plus_minus_triplets(profile: &CouplingProfile, dim: usize, nuclear_offset: usize) -> Triplets {
    let n = profile.n();
    let gi = profile.couplings();
    let mut trip = Vec::new();
    for s in 0..dim {
        for j in 0..n {
            let bj = 1 << (j + nuclear_offset);
            if s & bj == 0 {
                continue;
            }
            let s1 = s & !bj;
            for i in 0..n {
                let bi = 1 << (i + nuclear_offset);
                if s1 & bi != 0 {
                    continue;
                }
                trip.push((s1 | bi, s, c(gi[i] * gi[j])));
            }
        }
    }
    trip
}

/// `sum_ij g_i g_j sigma_i^+ sigma_j^-` on the nuclear register starting at bit `nuclear_offset`.
pub(crate) fn a_plus_minus_operator(profile: &CouplingProfile, dim: usize, nuclear_offset: usize) -> Csr {
    Csr::from_triplets(dim, dim, a_plus_minus_triplets(profile, dim, nuclear_offset))
}

/// Assembles the block generator for a profile and parameters.
pub fn generator(profile: &CouplingProfile, params: &SystemParams, n_max: usize) -> Result<BlockLindblad> {
    let n = profile.n();
    check_capacity(n, n_max)?;
    params.validate()?;
    let dim = product_dim(n);
    let isotropic = profile.anisotropic().is_none();
    let basis = if isotropic {
        Basis::grouped(dim, BasisTag::Product, |s| s.count_ones() as i64)
    } else {
        Basis::single(dim, BasisTag::Product)
    };
    let gi = profile.couplings();
    let mut jump = Vec::new();
    let mut jump_norm = Vec::new();
    for s in 0..dim {
        if electron_up(s) {
            jump.push((s & !1, s, c(1.0)));
            jump_norm.push((s, s, c(1.0)));
        }
    }
    let drive = match params.detuning {
        DetuningPolicy::Fixed(w) => Drive::Fixed(w),
        DetuningPolicy::Compensated(w) => Drive::Compensated { target: w, g: profile.g() },
    };
    BlockLindblad::new(LindbladSpec {
        basis,
        hamiltonian: hamiltonian_triplets(profile),
        zeeman: (0..dim).map(|s| z_value(electron_up(s))).collect(),
        drive,
        jump,
        jump_norm,
        rate: params.gamma_r,
        a_z: (0..dim).map(|s| (0..n).map(|i| gi[i] * z_value(nucleus_up(s, i))).sum()).collect(),
        a_plus_minus: a_plus_minus_triplets(profile, dim, 1),
        excitation: (0..dim).map(|s| s.count_ones() as f64).collect(),
        conserves_excitation: isotropic,
    })
}

/// `Gamma_r (S^- rho S^+ - {S^+S^-, rho}/2) - i[H, rho]` on an arbitrary (not
/// necessarily Hermitian or block-diagonal) dense matrix.
pub fn lindblad_rhs(rho: &DensityMatrix, h: &Csr, gamma_r: f64) -> Result<DensityMatrix> {
    let dim = rho.dim;
    if h.rows != dim || h.cols != dim {
        return Err(Error::Dimension { expected: dim, got: h.rows });
    }
    if !dim.is_power_of_two() || dim < 2 {
        return Err(Error::param("product-basis dimension must be a power of two >= 2"));
    }
    let mut out = DensityMatrix::zeros(dim, rho.basis);
    let mi = Complex64::new(0.0, -1.0);
    h.mul_dense_acc(&rho.entries, dim, mi, &mut out.entries);
    h.dense_mul_adjoint_acc(&rho.entries, dim, -mi, &mut out.entries);
    for a in 0..dim {
        for b in 0..dim {
            let mut v = Complex64::new(0.0, 0.0);
            if !electron_up(a) && !electron_up(b) {
                v += rho.get(a | 1, b | 1);
            }
            let na = electron_up(a) as u8 as f64;
            let nb = electron_up(b) as u8 as f64;
            v -= rho.get(a, b) * (0.5 * (na + nb));
            out.entries[a * dim + b] += v * gamma_r;
        }
    }
    Ok(out)
}

/// Product state: electron down, every nucleus up with probability `(1 + P)/2`.
pub fn product_state(n: usize, polarization: f64) -> DensityMatrix {
    let dim = product_dim(n);
    let p_up = 0.5 * (1.0 + polarization);
    let mut rho = DensityMatrix::zeros(dim, BasisTag::Product);
    for s in (0..dim).filter(|s| !electron_up(*s)) {
        let k = (s >> 1).count_ones() as i32;
        let p = p_up.powi(k) * (1.0 - p_up).powi(n as i32 - k);
        rho.set(s, s, c(p));
    }
    rho
}

/// Electron in `|m_S = 0>` (down) tensored with a nuclear density matrix.
pub fn with_electron_down(nuclear: &DensityMatrix) -> DensityMatrix {
    let dn = nuclear.dim;
    let mut rho = DensityMatrix::zeros(2 * dn, BasisTag::Product);
    for a in 0..dn {
        for b in 0..dn {
            rho.set(a << 1, b << 1, nuclear.get(a, b));
        }
    }
    rho
}

/// Expectation of `S^z` given a product-basis density matrix.
pub fn electron_z(rho: &DensityMatrix) -> f64 {
    (0..rho.dim).map(|s| rho.get(s, s).re * z_value(electron_up(s))).sum()
}

pub fn evolve(
    rho0: &DensityMatrix,
    profile: &CouplingProfile,
    params: &SystemParams,
    grid: &[f64],
    options: &RunOptions,
) -> Result<RunOutput> {
    evolve_with_limit(rho0, profile, params, grid, options, DEFAULT_N_MAX)
}

pub fn evolve_with_limit(
    rho0: &DensityMatrix,
    profile: &CouplingProfile,
    params: &SystemParams,
    grid: &[f64],
    options: &RunOptions,
    n_max: usize,
) -> Result<RunOutput> {
    let mut sys = generator(profile, params, n_max)?;
    if rho0.dim != product_dim(profile.n()) {
        return Err(Error::Dimension { expected: product_dim(profile.n()), got: rho0.dim });
    }
    propagate(&mut sys, rho0, grid, options)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conventions::polarized_start_state;
    use crate::model::{homogeneous_couplings, random_couplings};
    use crate::ode::uniform_grid;
    use rand::{Rng, SeedableRng};

    fn random_matrix(dim: usize, seed: u64) -> DensityMatrix {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut m = DensityMatrix::zeros(dim, BasisTag::Product);
        for v in &mut m.entries {
            *v = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
        m
    }

    #[test]
    fn single_flip_flop_element() {
        let p = homogeneous_couplings::<f64>(1).unwrap();
        let h = build_hamiltonian(&p, 0.0, DEFAULT_N_MAX).unwrap();
        let d = h.to_dense();
        // |e down, n up> = 0b10, |e up, n down> = 0b01.
        assert!((d[2 * 4 + 1] - c(0.5 * p.g())).norm() < 1e-15);
        assert!((d[4 + 2] - c(0.5 * p.g())).norm() < 1e-15);
        assert_eq!(hermiticity_defect(&h), 0.0);
    }

    #[test]
    fn hamiltonian_hermitian_with_anisotropy() {
        let p = random_couplings::<f64>(3, 0.2, 4).unwrap();
        let t = vec![[[0.01, 0.02, -0.03], [0.02, 0.0, 0.01], [-0.03, 0.01, 0.05]]; 3];
        let p = p.with_anisotropic(t).unwrap();
        let h = build_hamiltonian(&p, 0.3, DEFAULT_N_MAX).unwrap();
        assert!(hermiticity_defect(&h) < 1e-15);
    }

    #[test]
    fn capacity_guard() {
        let p = homogeneous_couplings::<f64>(5).unwrap();
        let err = build_hamiltonian(&p, 0.0, 4).unwrap_err();
        assert!(matches!(err, Error::Capacity { n: 5, limit: 4, .. }));
        assert!(err.to_string().contains("cumulant"));
    }

    #[test]
    fn homogeneous_hamiltonian_commutes_with_total_spin() {
        let p = homogeneous_couplings::<f64>(2).unwrap();
        let h = build_hamiltonian(&p, 0.37, DEFAULT_N_MAX).unwrap().to_dense();
        // J^2 of the nuclei on the 8-dim product space.
        let dim = 8;
        let mut j2 = vec![c(0.0); dim * dim];
        for s in 0..dim {
            let z: f64 = (0..2).map(|i| z_value(nucleus_up(s, i))).sum();
            j2[s * dim + s] += c(z * z + 1.0);
            // (J^+J^- + J^-J^+)/2 = 1 + sigma_0^+ sigma_1^- + h.c. for two spins.
            if nucleus_up(s, 0) != nucleus_up(s, 1) {
                let t = s ^ (1 << 1) ^ (1 << 2);
                j2[t * dim + s] += c(1.0);
            }
        }
        for a in 0..dim {
            for b in 0..dim {
                let hj: Complex64 = (0..dim).map(|k| h[a * dim + k] * j2[k * dim + b]).sum();
                let jh: Complex64 = (0..dim).map(|k| j2[a * dim + k] * h[k * dim + b]).sum();
                assert!((hj - jh).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn dark_electron_state_is_stationary_without_hamiltonian() {
        let zero_h = Csr::from_triplets(8, 8, vec![]);
        let mut rho = random_matrix(8, 2);
        for a in 0..8 {
            for b in 0..8 {
                if electron_up(a) || electron_up(b) {
                    rho.set(a, b, c(0.0));
                }
            }
        }
        let out = lindblad_rhs(&rho, &zero_h, 1.7).unwrap();
        assert!(out.l1_norm() < 1e-15);
    }

    #[test]
    fn pure_decay_rate() {
        let zero_h = Csr::from_triplets(8, 8, vec![]);
        let rho = DensityMatrix::basis_state(8, 1, BasisTag::Product);
        let out = lindblad_rhs(&rho, &zero_h, 2.5).unwrap();
        let dn: f64 = (0..8).filter(|s| electron_up(*s)).map(|s| out.get(s, s).re).sum();
        assert!((dn + 2.5).abs() < 1e-15);
    }

    #[test]
    fn rhs_is_traceless_and_dimension_checked() {
        let p = random_couplings::<f64>(2, 0.1, 9).unwrap();
        let h = build_hamiltonian(&p, 0.4, DEFAULT_N_MAX).unwrap();
        let out = lindblad_rhs(&random_matrix(8, 5), &h, 0.9).unwrap();
        assert!(out.trace().norm() < 1e-12);
        assert!(matches!(lindblad_rhs(&random_matrix(4, 1), &h, 1.0), Err(Error::Dimension { .. })));
    }

    #[test]
    fn block_generator_matches_dense_rhs() {
        let p = random_couplings::<f64>(3, 0.2, 11).unwrap();
        let params = SystemParams::new(0.8, DetuningPolicy::Fixed(0.3)).unwrap();
        let mut sys = generator(&p, &params, DEFAULT_N_MAX).unwrap();
        // Block-diagonal Hermitian test state: mix of random pure states in two sectors.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut rho = DensityMatrix::zeros(16, BasisTag::Product);
        for k in [1u32, 2, 3] {
            let members: Vec<usize> = (0..16).filter(|s: &usize| s.count_ones() == k).collect();
            let amps: Vec<Complex64> =
                members.iter().map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            for (ia, a) in members.iter().enumerate() {
                for (ib, b) in members.iter().enumerate() {
                    rho.set(*a, *b, amps[ia] * amps[ib].conj() * 0.1);
                }
            }
        }
        let y = sys.pack(&rho).unwrap();
        let mut dy = vec![c(0.0); y.len()];
        sys.evaluate(&y, &mut dy);
        let dense = lindblad_rhs(&rho, &build_hamiltonian(&p, 0.3, DEFAULT_N_MAX).unwrap(), 0.8).unwrap();
        let blocks = sys.unpack(&dy);
        for (a, b) in blocks.entries.iter().zip(&dense.entries) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn single_spin_emits_one_photon() {
        let p = homogeneous_couplings::<f64>(1).unwrap();
        let params = SystemParams::new(10.0, DetuningPolicy::Fixed(0.0)).unwrap();
        let rho0 = DensityMatrix::basis_state(4, polarized_start_state(1), BasisTag::Product);
        let grid = uniform_grid(300.0, 3000);
        let run = evolve(&rho0, &p, &params, &grid, &RunOptions::default()).unwrap();
        let ts = &run.series;
        assert!((ts.excitation[0] - 1.0).abs() < 1e-12);
        assert!(ts.excitation.last().unwrap().abs() < 1e-3);
        // Trapezoid integral of the photon rate.
        let photons: f64 = ts.t.windows(2).zip(ts.intensity.windows(2)).map(|(t, i)| 0.5 * (t[1] - t[0]) * (i[0] + i[1])).sum();
        assert!((photons - 1.0).abs() < 1e-3, "photons = {photons}");
        assert!(run.invariants.max_trace_error < 1e-8);
    }

    #[test]
    fn dark_start_never_emits() {
        let p = random_couplings::<f64>(3, 0.3, 1).unwrap();
        let params = SystemParams::new(1.0, DetuningPolicy::Compensated(0.5)).unwrap();
        let rho0 = DensityMatrix::basis_state(16, 0, BasisTag::Product);
        let run = evolve(&rho0, &p, &params, &uniform_grid(50.0, 50), &RunOptions::default()).unwrap();
        assert!(run.series.intensity.iter().all(|i| i.abs() < 1e-15));
    }

    #[test]
    fn unitary_dynamics_conserve_purity() {
        let p = random_couplings::<f64>(3, 0.3, 2).unwrap();
        let params = SystemParams::new(1e-300, DetuningPolicy::Fixed(0.2)).unwrap();
        // Coherent superposition within one excitation sector.
        let mut amps2 = vec![c(0.0); 16];
        amps2[0b1100] = c(0.6);
        amps2[0b1010] = Complex64::new(0.0, 0.8);
        let rho0 = DensityMatrix::pure(&amps2, BasisTag::Product);
        let mut sys = generator(&p, &params, DEFAULT_N_MAX).unwrap();
        let opts = RunOptions { tolerances: crate::ode::Tolerances::new(1e-10, 1e-12), ..Default::default() };
        let run = propagate(&mut sys, &rho0, &uniform_grid(20.0, 10), &opts).unwrap();
        assert!((run.final_state.purity() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn product_state_normalized() {
        let rho = product_state(4, 0.6);
        assert!((rho.trace().re - 1.0).abs() < 1e-14);
        assert!((electron_z(&rho) + 0.5).abs() < 1e-14);
    }
}
