// SPDX-License-Identifier: Apache-2.0

//! Second-order moment closure for large ensembles.
//!
//! Tracked moments: `s_z = <S^z>`, `chi_i = <sigma_i^+ S^->`,
//! `gamma+_ij = <sigma_i^+ sigma_j^->` and `gamma-_ij = <sigma_i^+ S^z sigma_j^->`.
//! First moments `<S^->` and `<sigma_i^+>` vanish for the supported initial
//! states and stay zero because the dynamics is invariant under a common
//! phase rotation of all spins.

pub mod algebra;
pub mod rhs;

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{CouplingProfile, DetuningPolicy, InitialStateKind, SystemParams};
use crate::ode::{validate_grid, Dopri5, Observer, Tolerances};
use crate::sector::DensityMatrix;
use crate::series::TimeSeries;

pub use algebra::wick_factorize_third_order;
pub use rhs::{CumulantSystem, IndependentSystem, Splitting};

/// Offsets of the tracked moments inside the flat state vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CumulantLayout {
    pub n: usize,
}

impl CumulantLayout {
    pub fn len(&self) -> usize {
        1 + self.n + 2 * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn gp(&self, i: usize, j: usize) -> usize {
        1 + self.n + i * self.n + j
    }

    #[inline]
    pub fn gm(&self, i: usize, j: usize) -> usize {
        1 + self.n + self.n * self.n + i * self.n + j
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CumulantState {
    pub n: usize,
    pub s_z: f64,
    pub chi: Vec<Complex64>,
    /// Row-major `N x N`.
    pub gamma_plus: Vec<Complex64>,
    /// Row-major `N x N`.
    pub gamma_minus: Vec<Complex64>,
}

impl CumulantState {
    pub fn zeros(n: usize) -> Self {
        let z = Complex64::new(0.0, 0.0);
        Self { n, s_z: 0.0, chi: vec![z; n], gamma_plus: vec![z; n * n], gamma_minus: vec![z; n * n] }
    }

    #[inline]
    pub fn gp(&self, i: usize, j: usize) -> Complex64 {
        self.gamma_plus[i * self.n + j]
    }

    #[inline]
    pub fn gm(&self, i: usize, j: usize) -> Complex64 {
        self.gamma_minus[i * self.n + j]
    }

    pub fn pack(&self) -> Vec<Complex64> {
        let mut y = Vec::with_capacity(CumulantLayout { n: self.n }.len());
        y.push(Complex64::new(self.s_z, 0.0));
        y.extend_from_slice(&self.chi);
        y.extend_from_slice(&self.gamma_plus);
        y.extend_from_slice(&self.gamma_minus);
        y
    }

    pub fn unpack(n: usize, y: &[Complex64]) -> Self {
        let l = CumulantLayout { n };
        Self {
            n,
            s_z: y[0].re,
            chi: y[1..1 + n].to_vec(),
            gamma_plus: y[l.gp(0, 0)..l.gp(0, 0) + n * n].to_vec(),
            gamma_minus: y[l.gm(0, 0)..l.gm(0, 0) + n * n].to_vec(),
        }
    }

    /// `<S^+S^->`.
    pub fn electron_population(&self) -> f64 {
        0.5 + self.s_z
    }

    pub fn intensity(&self, gamma_r: f64) -> f64 {
        gamma_r * self.electron_population()
    }

    pub fn a_z(&self, couplings: &[f64]) -> f64 {
        couplings.iter().enumerate().map(|(i, g)| g * (self.gp(i, i).re - 0.5)).sum()
    }

    pub fn a_plus_minus(&self, couplings: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                acc += couplings[i] * couplings[j] * self.gp(i, j).re;
            }
        }
        acc
    }

    /// `<S^+S^-> + sum_i <n_i>`.
    pub fn excitation(&self) -> f64 {
        self.electron_population() + (0..self.n).map(|i| self.gp(i, i).re).sum::<f64>()
    }

    /// Exact moments of a product-basis density matrix (bit 0 electron).
    pub fn from_density(rho: &DensityMatrix, n: usize) -> Result<Self> {
        if rho.dim != 1 << (n + 1) {
            return Err(Error::Dimension { expected: 1 << (n + 1), got: rho.dim });
        }
        let oracle = algebra::DensityOracle { rho };
        let mut s = Self::zeros(n);
        for (t, o) in algebra::tracked_operators(n) {
            let v = algebra::expectation(&o, &oracle)?;
            match t {
                algebra::Tracked::Sz => s.s_z = v.re,
                algebra::Tracked::Chi(i) => s.chi[i] = v,
                algebra::Tracked::GammaPlus(i, j) => s.gamma_plus[i * n + j] = v,
                algebra::Tracked::GammaMinus(i, j) => s.gamma_minus[i * n + j] = v,
                algebra::Tracked::ChiConj(_) => {}
            }
        }
        Ok(s)
    }

    /// First violated state bound, if any.
    pub fn check_bounds(&self) -> Option<(String, f64, f64)> {
        let n = self.n;
        let mut herm = 0.0f64;
        for i in 0..n {
            for j in i..n {
                herm = herm.max((self.gp(i, j) - self.gp(j, i).conj()).norm());
            }
        }
        if herm > 1e-10 {
            return Some(("gamma+ Hermiticity".into(), herm, 1e-10));
        }
        for i in 0..n {
            let d = self.gp(i, i).re;
            if !(-1e-8..=1.0 + 1e-8).contains(&d) {
                return Some((format!("gamma+_{i}{i} outside [0, 1]"), d, 1e-8));
            }
            let m = self.gm(i, i).norm();
            if m > 0.5 * d + 1e-8 {
                return Some((format!("|gamma-_{i}{i}| above gamma+_{i}{i}/2"), m, 1e-8));
            }
        }
        let p = self.electron_population();
        if !(-1e-8..=1.0 + 1e-8).contains(&p) || !p.is_finite() {
            return Some(("<S^+S^-> outside [0, 1]".into(), p, 1e-8));
        }
        None
    }
}

/// `c(P)`: uniform off-diagonal covariance reproducing `<J^+J^->` of a mixture
/// of `|J, +-J>` states with `J = |P| N / 2`.
pub fn dicke_mixture_covariance(n: usize, polarization: f64) -> f64 {
    if n < 2 {
        return 0.0;
    }
    (polarization.abs() - 1.0) / (2.0 * (n as f64 - 1.0))
}

/// Initial moments with the electron in its dark level.
pub fn init_cumulant(profile: &CouplingProfile, polarization: f64, kind: InitialStateKind) -> Result<CumulantState> {
    if !(-1.0..=1.0).contains(&polarization) {
        return Err(Error::param(format!("polarization must lie in [-1, 1], got {polarization}")));
    }
    let n = profile.n();
    if n == 0 {
        return Err(Error::NoActiveNuclei);
    }
    let mut s = CumulantState::zeros(n);
    s.s_z = -0.5;
    let diag = 0.5 * (1.0 + polarization);
    let off = match kind {
        InitialStateKind::Product => 0.0,
        InitialStateKind::DickeMixture => dicke_mixture_covariance(n, polarization),
    };
    for i in 0..n {
        for j in 0..n {
            let v = if i == j { diag } else { off };
            s.gamma_plus[i * n + j] = Complex64::new(v, 0.0);
            s.gamma_minus[i * n + j] = Complex64::new(-0.5 * v, 0.0);
        }
    }
    Ok(s)
}

/// Binary `gamma+` snapshot: `u64 rows, u64 cols, f64 t` then `(re, im)` pairs, little-endian.
pub fn write_snapshot(path: &Path, t: f64, state: &CumulantState) -> Result<()> {
    let mut buf = Vec::with_capacity(24 + 16 * state.n * state.n);
    buf.extend_from_slice(&(state.n as u64).to_le_bytes());
    buf.extend_from_slice(&(state.n as u64).to_le_bytes());
    buf.extend_from_slice(&t.to_le_bytes());
    for v in &state.gamma_plus {
        buf.extend_from_slice(&v.re.to_le_bytes());
        buf.extend_from_slice(&v.im.to_le_bytes());
    }
    std::fs::File::create(path).and_then(|mut f| f.write_all(&buf)).map_err(|e| Error::io(path, e))
}

pub fn read_snapshot(path: &Path) -> Result<(f64, usize, Vec<Complex64>)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path).and_then(|mut f| f.read_to_end(&mut bytes)).map_err(|e| Error::io(path, e))?;
    let word = |k: usize| -> Result<[u8; 8]> {
        bytes.get(8 * k..8 * k + 8).map(|s| s.try_into().unwrap()).ok_or_else(|| Error::Config(format!("truncated snapshot {}", path.display())))
    };
    let rows = u64::from_le_bytes(word(0)?) as usize;
    let cols = u64::from_le_bytes(word(1)?) as usize;
    let t = f64::from_le_bytes(word(2)?);
    if bytes.len() != 24 + 16 * rows * cols {
        return Err(Error::Config(format!("snapshot {} has wrong length", path.display())));
    }
    let data = (0..rows * cols)
        .map(|k| Ok(Complex64::new(f64::from_le_bytes(word(3 + 2 * k)?), f64::from_le_bytes(word(4 + 2 * k)?))))
        .collect::<Result<Vec<_>>>()?;
    Ok((t, rows, data))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CumulantOptions {
    pub tolerances: Tolerances<f64>,
    /// Abort when the bookkeeping residual relative to the running peak intensity exceeds this.
    pub bookkeeping_abort: f64,
    /// Abort on violated state bounds (Hermiticity, populations).
    pub enforce_bounds: bool,
    /// Pin inter-site correlations at zero.
    pub independent: bool,
    /// Write a `gamma+` snapshot every this many samples into the directory.
    pub snapshots: Option<(usize, PathBuf)>,
}

impl Default for CumulantOptions {
    fn default() -> Self {
        Self {
            tolerances: Tolerances::default(),
            bookkeeping_abort: 1e-6,
            enforce_bounds: true,
            independent: false,
            snapshots: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CumulantRun {
    pub series: TimeSeries,
    pub final_state: CumulantState,
    pub max_bookkeeping_residual: f64,
    pub peak_intensity: f64,
    pub steps: usize,
}

struct Sampler {
    series: TimeSeries,
    dy: Vec<Complex64>,
    residual: f64,
    peak: f64,
    abort: f64,
    enforce_bounds: bool,
    snapshots: Option<(usize, PathBuf)>,
    failure: Option<Error>,
    /// Time of the last bookkeeping check; samples on an accepted step reuse it.
    checked_at: Option<f64>,
}

impl Sampler {
    fn bookkeeping(&mut self, t: f64, y: &[Complex64], dy: &[Complex64], sys: &CumulantSystem) -> Result<(), String> {
        self.checked_at = Some(t);
        let r = sys.bookkeeping_residual(y, dy);
        self.residual = self.residual.max(r);
        let intensity = sys.gamma_r * (0.5 + y[0].re);
        self.peak = self.peak.max(intensity);
        let scale = self.peak.max(crate::propagate::BOOKKEEPING_FLOOR);
        if r > self.abort * scale {
            self.failure = Some(Error::Invariant { time: t, what: "photon bookkeeping".into(), value: r / scale, tolerance: self.abort });
            return Err(format!("photon bookkeeping residual {r:e}"));
        }
        Ok(())
    }
}

impl Observer<f64, Complex64, CumulantSystem> for Sampler {
    fn sample(&mut self, index: usize, t: f64, y: &[Complex64], sys: &mut CumulantSystem) -> Result<(), String> {
        if self.checked_at != Some(t) {
            let mut dy = std::mem::take(&mut self.dy);
            dy.resize(y.len(), Complex64::new(0.0, 0.0));
            sys.evaluate(y, &mut dy);
            let res = self.bookkeeping(t, y, &dy, sys);
            self.dy = dy;
            res?;
        }
        let state = sys.state(y);
        let intensity = state.intensity(sys.gamma_r);
        self.series.push([
            t,
            intensity,
            state.a_z(&sys.couplings),
            state.a_plus_minus(&sys.couplings),
            state.excitation(),
            sys.omega(y),
        ]);
        if self.enforce_bounds {
            if let Some((what, value, tolerance)) = state.check_bounds() {
                let msg = format!("{what} = {value:e} at t = {t}");
                self.failure = Some(Error::Invariant { time: t, what, value, tolerance });
                return Err(msg);
            }
        }
        if let Some((every, dir)) = &self.snapshots {
            if *every > 0 && index % every == 0 {
                let path = dir.join(format!("gamma_plus_{index:06}.bin"));
                if let Err(e) = write_snapshot(&path, t, &state) {
                    let msg = e.to_string();
                    self.failure = Some(e);
                    return Err(msg);
                }
            }
        }
        Ok(())
    }

    fn accepted(&mut self, t: f64, y: &[Complex64], dy: &[Complex64], sys: &mut CumulantSystem) -> Result<(), String> {
        self.bookkeeping(t, y, dy, sys)
    }
}

/// Builds the closed system for a profile and parameters.
pub fn cumulant_system(profile: &CouplingProfile, params: &SystemParams) -> Result<CumulantSystem> {
    profile.require_isotropic()?;
    params.validate()?;
    if profile.n() == 0 {
        return Err(Error::NoActiveNuclei);
    }
    let splitting = match params.detuning {
        DetuningPolicy::Fixed(w) => Splitting::Fixed(w),
        DetuningPolicy::Compensated(w) => Splitting::Compensated(w),
    };
    Ok(CumulantSystem::new(profile.g(), profile.couplings().to_vec(), params.gamma_r, splitting))
}

/// One evaluation of the closed equations at a given splitting.
pub fn cumulant_rhs(state: &CumulantState, profile: &CouplingProfile, params: &SystemParams, omega_s_now: f64) -> Result<CumulantState> {
    let mut sys = cumulant_system(profile, params)?;
    if state.n != profile.n() {
        return Err(Error::Dimension { expected: profile.n(), got: state.n });
    }
    sys.splitting = Splitting::Fixed(omega_s_now);
    let y = state.pack();
    let mut dy = vec![Complex64::new(0.0, 0.0); y.len()];
    sys.evaluate(&y, &mut dy);
    Ok(CumulantState::unpack(state.n, &dy))
}

pub fn evolve_cumulant(
    state0: &CumulantState,
    profile: &CouplingProfile,
    params: &SystemParams,
    grid: &[f64],
    options: &CumulantOptions,
) -> Result<CumulantRun> {
    validate_grid(grid)?;
    let mut sys = cumulant_system(profile, params)?;
    if state0.n != profile.n() {
        return Err(Error::Dimension { expected: profile.n(), got: state0.n });
    }
    sys.independent = options.independent;
    let mut start = state0.clone();
    if options.independent {
        let n = start.n;
        for i in 0..n {
            for j in (0..n).filter(|j| *j != i) {
                start.gamma_plus[i * n + j] = Complex64::new(0.0, 0.0);
                start.gamma_minus[i * n + j] = Complex64::new(0.0, 0.0);
            }
        }
    }
    if let Some((_, dir)) = &options.snapshots {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut y = start.pack();
    let mut sampler = Sampler {
        series: TimeSeries::with_capacity(grid.len()),
        dy: vec![Complex64::new(0.0, 0.0); y.len()],
        residual: 0.0,
        peak: 0.0,
        abort: options.bookkeeping_abort,
        enforce_bounds: options.enforce_bounds,
        snapshots: options.snapshots.clone(),
        failure: None,
        checked_at: None,
    };
    let mut stepper = Dopri5::new(options.tolerances);
    match stepper.integrate(&mut sys, &mut y, grid, &mut sampler) {
        Ok(stats) => Ok(CumulantRun {
            series: sampler.series,
            final_state: sys.state(&y),
            max_bookkeeping_residual: sampler.residual,
            peak_intensity: sampler.peak,
            steps: stats.accepted,
        }),
        Err(e) => Err(sampler.failure.take().unwrap_or(Error::Integration(e))),
    }
}

struct IndependentSampler {
    series: TimeSeries,
    dy: Vec<Complex64>,
    residual: f64,
    peak: f64,
    abort: f64,
    failure: Option<Error>,
}

impl IndependentSampler {
    fn check(&mut self, t: f64, y: &[Complex64], dy: &[Complex64], sys: &IndependentSystem) -> Result<(), String> {
        let n = sys.system().layout.n;
        let dexc = dy[0].re + dy[1 + n..1 + 2 * n].iter().map(|v| v.re).sum::<f64>();
        let intensity = sys.system().gamma_r * (0.5 + y[0].re);
        let r = (dexc + intensity).abs();
        self.residual = self.residual.max(r);
        self.peak = self.peak.max(intensity);
        let scale = self.peak.max(crate::propagate::BOOKKEEPING_FLOOR);
        if r > self.abort * scale {
            self.failure = Some(Error::Invariant { time: t, what: "photon bookkeeping".into(), value: r / scale, tolerance: self.abort });
            return Err(format!("photon bookkeeping residual {r:e}"));
        }
        Ok(())
    }
}

impl Observer<f64, Complex64, IndependentSystem> for IndependentSampler {
    fn sample(&mut self, _index: usize, t: f64, y: &[Complex64], sys: &mut IndependentSystem) -> Result<(), String> {
        let mut dy = std::mem::take(&mut self.dy);
        crate::ode::OdeSystem::rhs(sys, t, y, &mut dy);
        let res = self.check(t, y, &dy, sys);
        self.dy = dy;
        res?;
        let inner = sys.system();
        let n = inner.layout.n;
        let g = &inner.couplings;
        let diag = &y[1 + n..1 + 2 * n];
        let a_z: f64 = g.iter().zip(diag).map(|(gk, d)| gk * (d.re - 0.5)).sum();
        let apm: f64 = g.iter().zip(diag).map(|(gk, d)| gk * gk * d.re).sum();
        let exc = 0.5 + y[0].re + diag.iter().map(|d| d.re).sum::<f64>();
        let omega = match inner.splitting {
            Splitting::Fixed(w) => w,
            Splitting::Compensated(target) => crate::control::compensated_omega(a_z, target, inner.g),
        };
        self.series.push([t, inner.gamma_r * (0.5 + y[0].re), a_z, apm, exc, omega]);
        Ok(())
    }

    fn accepted(&mut self, t: f64, y: &[Complex64], dy: &[Complex64], sys: &mut IndependentSystem) -> Result<(), String> {
        self.check(t, y, dy, sys)
    }
}

/// Same run with inter-site correlations pinned at zero, integrated on the
/// `O(N)` compact state.
pub fn independent_reference(
    state0: &CumulantState,
    profile: &CouplingProfile,
    params: &SystemParams,
    grid: &[f64],
    options: &CumulantOptions,
) -> Result<CumulantRun> {
    validate_grid(grid)?;
    if state0.n != profile.n() {
        return Err(Error::Dimension { expected: profile.n(), got: state0.n });
    }
    let mut sys = IndependentSystem::new(cumulant_system(profile, params)?);
    let mut y = sys.compress(&state0.pack());
    let mut sampler = IndependentSampler {
        series: TimeSeries::with_capacity(grid.len()),
        dy: vec![Complex64::new(0.0, 0.0); y.len()],
        residual: 0.0,
        peak: 0.0,
        abort: options.bookkeeping_abort,
        failure: None,
    };
    let mut stepper = Dopri5::new(options.tolerances);
    match stepper.integrate(&mut sys, &mut y, grid, &mut sampler) {
        Ok(stats) => {
            let n = profile.n();
            let full = sys.expand(&y).to_vec();
            Ok(CumulantRun {
                series: sampler.series,
                final_state: CumulantState::unpack(n, &full),
                max_bookkeeping_residual: sampler.residual,
                peak_intensity: sampler.peak,
                steps: stats.accepted,
            })
        }
        Err(e) => Err(sampler.failure.take().unwrap_or(Error::Integration(e))),
    }
}

#[cfg(test)]
mod tests;
