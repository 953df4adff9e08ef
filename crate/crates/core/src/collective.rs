// SPDX-License-Identifier: Apache-2.0

//! Homogeneous couplings: exact dynamics in the symmetric Dicke basis and the
//! ideal Dicke-ladder rate equations used as the superradiance reference.

use num_complex::Complex64;

use crate::conventions::z_value;
use crate::error::{Error, IntegrationError, Result};
use crate::model::{CouplingProfile, DetuningPolicy, SystemParams};
use crate::ode::{validate_grid, Dopri5, Observer, OdeSystem, Tolerances};
use crate::propagate::{propagate, RunOptions, RunOutput};
use crate::scalar::{OdeElem, Real};
use crate::sector::{Basis, BasisTag, BlockLindblad, DensityMatrix, Drive, LindbladSpec};
use crate::series::TimeSeries;

/// `<J, m| A^+ A^- |J, m>` for `n` homogeneously coupled spins, `g_i = 1/sqrt(n)`.
pub fn aplus_aminus_element<T: Real + OdeElem<T>>(j: T, m: T, n: usize) -> Result<T> {
    if m.abs() > j + T::lit(1e-12) || j > T::from_usize(n).unwrap() / T::lit(2.0) + T::lit(1e-12) {
        return Err(Error::param(format!("need |m| <= J <= n/2, got J = {j}, m = {m}, n = {n}")));
    }
    Ok((j + m) * (j - m + T::one()) / T::from_usize(n).unwrap())
}

/// Populations of `|J, m>`, `m = -J..J`, stored at index `m + J`.
#[derive(Debug, Clone, PartialEq)]
pub struct DickeLadderState<T: Real = f64> {
    pub j: T,
    pub populations: Vec<T>,
    pub c_r: T,
}

impl<T: Real + OdeElem<T>> DickeLadderState<T> {
    /// All population in `|J = n/2, m = J>`.
    pub fn fully_polarized(n: usize, c_r: T) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("ladder needs n >= 1"));
        }
        if !(c_r > T::zero()) {
            return Err(Error::param(format!("c_r must be positive, got {c_r}")));
        }
        let mut populations = vec![T::zero(); n + 1];
        populations[n] = T::one();
        Ok(Self { j: T::from_usize(n).unwrap() / T::lit(2.0), populations, c_r })
    }

    pub fn n(&self) -> usize {
        self.populations.len() - 1
    }

    /// Emission rate out of level `k = m + J` in units of `c_r`: `(J + m)(J - m + 1)`.
    #[inline]
    pub fn weight(&self, k: usize) -> T {
        let kk = T::from_usize(k).unwrap();
        let two_j = T::from_usize(self.n()).unwrap();
        kk * (two_j - kk + T::one())
    }

    pub fn total(&self) -> T {
        self.populations.iter().copied().sum()
    }

    pub fn intensity(&self) -> T {
        self.c_r * (0..=self.n()).map(|k| self.weight(k) * self.populations[k]).sum::<T>()
    }

    pub fn mean_m(&self) -> T {
        (0..=self.n()).map(|k| (T::from_usize(k).unwrap() - self.j) * self.populations[k]).sum()
    }
}

struct Ladder<T: Real + OdeElem<T>> {
    weights: Vec<T>,
    c_r: T,
}

impl<T: Real + OdeElem<T>> OdeSystem<T, T> for Ladder<T> {
    fn rhs(&mut self, _t: T, p: &[T], dp: &mut [T]) {
        let n = p.len() - 1;
        for k in 0..=n {
            let inflow = if k < n { self.weights[k + 1] * p[k + 1] } else { T::zero() };
            dp[k] = self.c_r * (inflow - self.weights[k] * p[k]);
        }
    }
}

/// Ladder run output: series plus the worst bookkeeping residual `|d<exc>/dt + I|`.
#[derive(Debug, Clone)]
pub struct LadderRun<T: Real = f64> {
    pub series: TimeSeries<T>,
    pub final_state: DickeLadderState<T>,
    pub max_bookkeeping_residual: T,
    pub used_semi_implicit: bool,
}

struct LadderSampler<T: Real + OdeElem<T>> {
    series: TimeSeries<T>,
    residual: T,
    dp: Vec<T>,
    sqrt_n: T,
    j: T,
}

impl<T: Real + OdeElem<T>> LadderSampler<T> {
    fn record(&mut self, t: T, p: &[T], sys: &mut Ladder<T>) {
        let n = p.len() - 1;
        let nf = T::from_usize(n).unwrap();
        let intensity = sys.c_r * (0..=n).map(|k| sys.weights[k] * p[k]).sum::<T>();
        let apam = (0..=n).map(|k| sys.weights[k] * p[k]).sum::<T>() / nf;
        let mean_k: T = (0..=n).map(|k| T::from_usize(k).unwrap() * p[k]).sum();
        let a_z = (mean_k - self.j * (0..=n).map(|k| p[k]).sum::<T>()) / self.sqrt_n;
        sys.rhs(t, p, &mut self.dp);
        let dexc: T = (0..=n).map(|k| T::from_usize(k).unwrap() * self.dp[k]).sum();
        self.residual = self.residual.max((dexc + intensity).abs());
        self.series.push([t, intensity, a_z, apam, mean_k, T::zero()]);
    }
}

impl<T: Real + OdeElem<T>> Observer<T, T, Ladder<T>> for LadderSampler<T> {
    fn sample(&mut self, _i: usize, t: T, p: &[T], sys: &mut Ladder<T>) -> Result<(), String> {
        self.record(t, p, sys);
        Ok(())
    }
}

/// Crank-Nicolson step of the bidiagonal ladder system (unconditionally stable).
fn ladder_cn_step<T: Real + OdeElem<T>>(p: &mut [T], weights: &[T], c_r: T, h: T) {
    let n = p.len() - 1;
    let half = h * c_r / T::lit(2.0);
    let old = p.to_vec();
    let mut next = vec![T::zero(); n + 1];
    for k in (0..=n).rev() {
        let inflow_old = if k < n { weights[k + 1] * old[k + 1] } else { T::zero() };
        let explicit = old[k] + half * (inflow_old - weights[k] * old[k]);
        let inflow_new = if k < n { weights[k + 1] * next[k + 1] } else { T::zero() };
        next[k] = (explicit + half * inflow_new) / (T::one() + half * weights[k]);
    }
    p.copy_from_slice(&next);
}

fn ladder_semi_implicit<T: Real + OdeElem<T>>(
    state: &DickeLadderState<T>,
    grid: &[T],
    sys: &mut Ladder<T>,
    sampler: &mut LadderSampler<T>,
) -> Vec<T> {
    let mut p = state.populations.clone();
    let max_rate = sys.weights.iter().copied().fold(T::zero(), T::max) * sys.c_r;
    let h_target = T::lit(0.05) / max_rate.max(T::min_positive_value());
    sampler.record(grid[0], &p, sys);
    for w in grid.windows(2) {
        let span = w[1] - w[0];
        let steps = (span / h_target).ceil().to_usize().unwrap_or(1).max(1);
        let h = span / T::from_usize(steps).unwrap();
        for _ in 0..steps {
            ladder_cn_step(&mut p, &sys.weights, sys.c_r, h);
        }
        sampler.record(w[1], &p, sys);
    }
    p
}

/// Integrates the Dicke-ladder rate equations from `|J = n/2, J>`.
pub fn dicke_ladder_evolve<T: Real + OdeElem<T>>(n: usize, c_r: T, grid: &[T], tol: Tolerances<T>) -> Result<LadderRun<T>> {
    let state = DickeLadderState::fully_polarized(n, c_r)?;
    ladder_evolve_from(&state, grid, tol)
}

pub fn ladder_evolve_from<T: Real + OdeElem<T>>(state: &DickeLadderState<T>, grid: &[T], tol: Tolerances<T>) -> Result<LadderRun<T>> {
    validate_grid(grid)?;
    let n = state.n();
    let weights: Vec<T> = (0..=n).map(|k| state.weight(k)).collect();
    let mut sys = Ladder { weights, c_r: state.c_r };
    let new_sampler = || LadderSampler {
        series: TimeSeries::with_capacity(grid.len()),
        residual: T::zero(),
        dp: vec![T::zero(); n + 1],
        sqrt_n: T::from_usize(n).unwrap().sqrt(),
        j: state.j,
    };
    let mut sampler = new_sampler();
    let mut p = state.populations.clone();
    let mut used_semi_implicit = false;
    match Dopri5::new(tol).integrate(&mut sys, &mut p, grid, &mut sampler) {
        Ok(_) => {}
        Err(IntegrationError::StepTooSmall { .. }) => {
            sampler = new_sampler();
            p = ladder_semi_implicit(state, grid, &mut sys, &mut sampler);
            used_semi_implicit = true;
        }
        Err(e) => return Err(e.into()),
    }
    Ok(LadderRun {
        series: sampler.series,
        final_state: DickeLadderState { j: state.j, populations: p, c_r: state.c_r },
        max_bookkeeping_residual: sampler.residual,
        used_semi_implicit,
    })
}

/// Characteristic ladder emission time `(ln n + 1) / (n c_r)`.
pub fn ladder_time_scale<T: Real + OdeElem<T>>(n: usize, c_r: T) -> T {
    let nf = T::from_usize(n.max(1)).unwrap();
    (nf.ln() + T::one()) / (nf * c_r)
}

/// Index of `|J = n/2, m> (x) |e>` in the collective basis.
#[inline]
pub fn collective_index(k: usize, electron_up: bool) -> usize {
    2 * k + electron_up as usize
}

pub fn collective_dim(n: usize) -> usize {
    2 * (n + 1)
}

/// Block generator for the homogeneous master equation on `|J = n/2, m> (x) {down, up}`.
pub fn collective_generator(profile: &CouplingProfile, params: &SystemParams) -> Result<BlockLindblad> {
    if !profile.is_homogeneous() {
        return Err(Error::NotHomogeneous);
    }
    profile.require_isotropic()?;
    params.validate()?;
    let n = profile.n();
    let nf = n as f64;
    let j = nf / 2.0;
    let g = profile.g();
    let dim = collective_dim(n);
    let mut ham = Vec::new();
    let mut zeeman = vec![0.0; dim];
    let mut a_z = vec![0.0; dim];
    let mut apam = Vec::new();
    let mut excitation = vec![0.0; dim];
    let mut jump = Vec::new();
    let mut jump_norm = Vec::new();
    let one = Complex64::new(1.0, 0.0);
    for k in 0..=n {
        let m = k as f64 - j;
        for up in [false, true] {
            let s = collective_index(k, up);
            let ze = z_value(up);
            zeeman[s] = ze;
            a_z[s] = m / nf.sqrt();
            excitation[s] = k as f64 + up as u8 as f64;
            ham.push((s, s, Complex64::new(g * m / nf.sqrt() * ze, 0.0)));
            apam.push((s, s, Complex64::new((j + m) * (j - m + 1.0) / nf, 0.0)));
        }
        if k < n {
            // (g/2) A^+ S^- : |k, up> -> |k+1, down>.
            let amp = 0.5 * g * ((j - m) * (j + m + 1.0)).sqrt() / nf.sqrt();
            let (src, dst) = (collective_index(k, true), collective_index(k + 1, false));
            ham.push((dst, src, Complex64::new(amp, 0.0)));
            ham.push((src, dst, Complex64::new(amp, 0.0)));
        }
        jump.push((collective_index(k, false), collective_index(k, true), one));
        jump_norm.push((collective_index(k, true), collective_index(k, true), one));
    }
    let drive = match params.detuning {
        DetuningPolicy::Fixed(w) => Drive::Fixed(w),
        DetuningPolicy::Compensated(w) => Drive::Compensated { target: w, g },
    };
    BlockLindblad::new(LindbladSpec {
        basis: Basis::grouped(dim, BasisTag::Collective, |s| (s / 2 + s % 2) as i64),
        hamiltonian: ham,
        zeeman,
        drive,
        jump,
        jump_norm,
        rate: params.gamma_r,
        a_z,
        a_plus_minus: apam,
        excitation,
        conserves_excitation: true,
    })
}

/// `|J = n/2, J> (x) |down>`.
pub fn polarized_collective_state(n: usize) -> DensityMatrix {
    DensityMatrix::basis_state(collective_dim(n), collective_index(n, false), BasisTag::Collective)
}

/// Exact homogeneous evolution from the fully polarized state.
pub fn collective_exact_evolve(
    profile: &CouplingProfile,
    params: &SystemParams,
    grid: &[f64],
    options: &RunOptions,
) -> Result<RunOutput> {
    if (params.initial_polarization - 1.0).abs() > 1e-12 {
        return Err(Error::param(
            "the symmetric-basis solver starts from full polarization; partial polarization leaves the J = N/2 sector",
        ));
    }
    let mut sys = collective_generator(profile, params)?;
    propagate(&mut sys, &polarized_collective_state(profile.n()), grid, options)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{homogeneous_couplings, random_couplings};
    use crate::ode::uniform_grid;
    use crate::series::{relative_peak, Reference};

    #[test]
    fn matrix_element_examples() {
        assert!((aplus_aminus_element(5.0f64, 5.0, 10).unwrap() - 1.0).abs() < 1e-15);
        assert!((aplus_aminus_element(50.0f64, 0.0, 100).unwrap() - 25.5).abs() < 1e-12);
        assert_eq!(aplus_aminus_element(3.0f64, -3.0, 6).unwrap(), 0.0);
        assert!(aplus_aminus_element(1.0, 2.0, 4).is_err());
    }

    #[test]
    fn single_spin_ladder_is_exponential() {
        let grid = uniform_grid(5.0f64, 50);
        let run = dicke_ladder_evolve(1, 1.0f64, &grid, Tolerances::default()).unwrap();
        for (t, i) in run.series.t.iter().zip(&run.series.intensity) {
            assert!((i - (-t).exp()).abs() < 1e-8);
        }
        assert!((relative_peak(&run.series, Reference::Initial).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ladder_conserves_probability_and_bookkeeping() {
        let grid = uniform_grid(ladder_time_scale(64, 1.0f64) * 4.0, 200);
        let run = dicke_ladder_evolve(64, 1.0f64, &grid, Tolerances::default()).unwrap();
        assert!((run.final_state.total() - 1.0).abs() < 1e-12);
        assert!(run.final_state.populations.iter().all(|p| *p >= -1e-12));
        let peak = run.series.peak().unwrap().1;
        assert!(run.max_bookkeeping_residual < 1e-8 * peak);
        // Burst: peak well above the initial rate, delayed from t = 0.
        assert!(relative_peak(&run.series, Reference::Initial).unwrap() > 5.0);
        assert!(run.series.peak().unwrap().0 > 0.0);
    }

    #[test]
    fn ladder_single_precision() {
        let grid = uniform_grid(ladder_time_scale(16, 1.0f32) * 4.0, 100);
        let run = dicke_ladder_evolve(16, 1.0f32, &grid, Tolerances::new(1e-5, 1e-7)).unwrap();
        let run64 = dicke_ladder_evolve(16, 1.0f64, &uniform_grid(ladder_time_scale(16, 1.0) * 4.0, 100), Tolerances::default()).unwrap();
        let p32 = relative_peak(&run.series, Reference::Initial).unwrap() as f64;
        let p64 = relative_peak(&run64.series, Reference::Initial).unwrap();
        assert!((p32 - p64).abs() < 1e-3 * p64);
    }

    #[test]
    fn semi_implicit_fallback_agrees() {
        let n = 32;
        let grid = uniform_grid(ladder_time_scale(n, 1.0) * 3.0, 60);
        let adaptive = dicke_ladder_evolve(n, 1.0, &grid, Tolerances::default()).unwrap();
        // Force the collapse path with an impossible minimum step.
        let tol = Tolerances { min_step_fraction: 0.5, ..Tolerances::default() };
        let fallback = dicke_ladder_evolve(n, 1.0, &grid, tol).unwrap();
        assert!(fallback.used_semi_implicit);
        let peak = adaptive.series.peak().unwrap().1;
        assert!(adaptive.series.intensity_sup_distance(&fallback.series).unwrap() < 1e-3 * peak);
    }

    #[test]
    fn collective_rejects_inhomogeneous() {
        let p = random_couplings::<f64>(4, 0.2, 3).unwrap();
        let params = SystemParams::new(1.0, DetuningPolicy::Fixed(0.0)).unwrap();
        assert!(matches!(collective_generator(&p, &params), Err(Error::NotHomogeneous)));
    }

    #[test]
    fn bottleneck_caps_emission() {
        // epsilon = A/(2 Delta) = 1/Gamma >> 1 at omega_S = 0: the electron saturates.
        let p = homogeneous_couplings::<f64>(40).unwrap();
        let params = SystemParams::new(0.02, DetuningPolicy::Fixed(0.0)).unwrap();
        let run = collective_exact_evolve(&p, &params, &uniform_grid(400.0, 400), &RunOptions::default()).unwrap();
        let peak = run.series.peak().unwrap().1;
        assert!(peak <= 0.5 * params.gamma_r * 1.05, "peak {peak}");
    }

    #[test]
    fn compensated_run_holds_effective_splitting() {
        let p = homogeneous_couplings::<f64>(20).unwrap();
        let params = SystemParams::for_epsilon(0.7, 1.0, true).unwrap();
        let run = collective_exact_evolve(&p, &params, &uniform_grid(100.0, 100), &RunOptions::default()).unwrap();
        for (w, az) in run.series.omega_s.iter().zip(&run.series.a_z) {
            assert!((w + p.g() * az - 0.5).abs() < 1e-9);
        }
    }
}
