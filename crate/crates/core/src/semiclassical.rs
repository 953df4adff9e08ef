// SPDX-License-Identifier: Apache-2.0

//! Mean-field Bloch equations for the electron and a homogeneous nuclear
//! ensemble with a transverse field, and continuation scans of their
//! steady states.
//!
//! With `A = g sqrt(N)` and per-spin nuclear Bloch vector `a`:
//!
//! `ds/dt = (A a + omega_S z + omega_e x) x s - Gamma_r (s_x/2, s_y/2, 1/2 + s_z)`
//! `da/dt = ((A/N) s + omega_x x) x a`
//!
//! where `omega_e = omega_x` when the drive also acts on the electron and 0 otherwise.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{Dopri5, OdeSystem, Tolerances};
use crate::scalar::{OdeElem, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldState<T: Real = f64> {
    pub s: [T; 3],
    pub a: [T; 3],
    pub omega_x: T,
}

impl<T: Real> MeanFieldState<T> {
    /// Electron down, nuclei fully down (the dark configuration).
    pub fn dark(omega_x: T) -> Self {
        let h = T::lit(0.5);
        Self { s: [T::zero(), T::zero(), -h], a: [T::zero(), T::zero(), -h], omega_x }
    }

    /// Electron down, nuclei fully up.
    pub fn polarized(omega_x: T) -> Self {
        let h = T::lit(0.5);
        Self { s: [T::zero(), T::zero(), -h], a: [T::zero(), T::zero(), h], omega_x }
    }

    pub fn to_vec(&self) -> [T; 6] {
        [self.s[0], self.s[1], self.s[2], self.a[0], self.a[1], self.a[2]]
    }

    pub fn from_slice(y: &[T], omega_x: T) -> Self {
        Self { s: [y[0], y[1], y[2]], a: [y[3], y[4], y[5]], omega_x }
    }

    pub fn norms(&self) -> (T, T) {
        let n = |v: &[T; 3]| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        (n(&self.s), n(&self.a))
    }

    /// `|s|, |a| <= 1/2 + 1e-9`.
    pub fn within_bloch_ball(&self) -> bool {
        let (s, a) = self.norms();
        let lim = T::lit(0.5 + 1e-9);
        s <= lim && a <= lim
    }
}

/// Which species the transverse field acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DriveTarget {
    #[default]
    Nuclei,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldParams<T: Real = f64> {
    pub n: usize,
    /// Hyperfine scale `A = g sum_i g_i`.
    pub a_scale: T,
    pub gamma_r: T,
    pub omega_s: T,
    pub drive: DriveTarget,
}

impl<T: Real> MeanFieldParams<T> {
    pub fn new(n: usize, gamma_r: T, omega_s: T) -> Result<Self> {
        if n == 0 {
            return Err(Error::NoActiveNuclei);
        }
        if !(gamma_r > T::zero()) {
            return Err(Error::param(format!("Gamma_r must be positive, got {gamma_r}")));
        }
        Ok(Self { n, a_scale: T::one(), gamma_r, omega_s, drive: DriveTarget::Nuclei })
    }
}

fn cross<T: Real>(b: [T; 3], v: [T; 3]) -> [T; 3] {
    [b[1] * v[2] - b[2] * v[1], b[2] * v[0] - b[0] * v[2], b[0] * v[1] - b[1] * v[0]]
}

/// Time derivative of `(s, a)`.
pub fn mean_field_rhs<T: Real>(state: &MeanFieldState<T>, params: &MeanFieldParams<T>) -> [T; 6] {
    let mut out = [T::zero(); 6];
    rhs_into(&state.to_vec(), state.omega_x, params, &mut out);
    out
}

fn rhs_into<T: Real>(y: &[T], omega_x: T, p: &MeanFieldParams<T>, dy: &mut [T]) {
    let s = [y[0], y[1], y[2]];
    let a = [y[3], y[4], y[5]];
    let half = T::lit(0.5);
    let omega_e = match p.drive {
        DriveTarget::Nuclei => T::zero(),
        DriveTarget::Both => omega_x,
    };
    let b_e = [p.a_scale * a[0] + omega_e, p.a_scale * a[1], p.a_scale * a[2] + p.omega_s];
    let nf = T::from_usize(p.n).unwrap();
    let b_n = [p.a_scale * s[0] / nf + omega_x, p.a_scale * s[1] / nf, p.a_scale * s[2] / nf];
    let ds = cross(b_e, s);
    let da = cross(b_n, a);
    dy[0] = ds[0] - p.gamma_r * half * s[0];
    dy[1] = ds[1] - p.gamma_r * half * s[1];
    dy[2] = ds[2] - p.gamma_r * (half + s[2]);
    dy[3..6].copy_from_slice(&da);
}

struct System<T: Real> {
    params: MeanFieldParams<T>,
    omega_x: T,
}

impl<T: Real + OdeElem<T>> OdeSystem<T, T> for System<T> {
    fn rhs(&mut self, _t: T, y: &[T], dy: &mut [T]) {
        rhs_into(y, self.omega_x, &self.params, dy);
    }
}

/// Integrates the mean-field equations, sampling on `grid`.
pub fn evolve_mean_field<T: Real + OdeElem<T>>(
    state0: &MeanFieldState<T>,
    params: &MeanFieldParams<T>,
    grid: &[T],
    tol: Tolerances<T>,
) -> Result<Vec<MeanFieldState<T>>> {
    crate::ode::validate_grid(grid)?;
    let mut sys = System { params: *params, omega_x: state0.omega_x };
    let mut y = state0.to_vec();
    let mut out = Vec::with_capacity(grid.len());
    let omega_x = state0.omega_x;
    let mut obs = |_i: usize, _t: T, y: &[T], _s: &mut System<T>| -> std::result::Result<(), String> {
        out.push(MeanFieldState::from_slice(y, omega_x));
        Ok(())
    };
    Dopri5::new(tol).integrate(&mut sys, &mut y, grid, &mut obs)?;
    Ok(out)
}

/// Parameter varied by a scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanParameter {
    OmegaX,
    GammaR,
    OmegaS,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Up,
    Down,
}

impl Direction {
    pub fn label(self) -> &'static str {
        match self {
            Direction::Up => "up",
            Direction::Down => "down",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanOptions<T: Real = f64> {
    /// Integration time between convergence checks.
    pub chunk: T,
    /// Give up on a point after this much time.
    pub t_max: T,
    /// Convergence when the Euclidean norm of the right-hand side falls below this.
    pub rhs_tol: T,
    pub tolerances: Tolerances<T>,
}

impl<T: Real> Default for ScanOptions<T> {
    fn default() -> Self {
        Self { chunk: T::lit(50.0), t_max: T::lit(2.0e5), rhs_tol: T::lit(1e-10), tolerances: Tolerances::new(T::lit(1e-10), T::lit(1e-12)) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchPoint<T: Real = f64> {
    pub param: T,
    pub state: MeanFieldState<T>,
    pub converged: bool,
    pub direction: Direction,
}

pub const BRANCH_CSV_HEADER: &str = "param,s_x,s_y,s_z,a_x,a_y,a_z,converged,direction";

fn rhs_norm<T: Real>(y: &[T], omega_x: T, p: &MeanFieldParams<T>) -> T {
    let mut d = [T::zero(); 6];
    rhs_into(y, omega_x, p, &mut d);
    d.iter().map(|v| *v * *v).sum::<T>().sqrt()
}

/// Integrates to a fixed point (or `t_max`) from `seed`.
pub fn relax<T: Real + OdeElem<T>>(
    seed: &MeanFieldState<T>,
    params: &MeanFieldParams<T>,
    options: &ScanOptions<T>,
) -> Result<(MeanFieldState<T>, bool)> {
    let mut sys = System { params: *params, omega_x: seed.omega_x };
    let mut y = seed.to_vec();
    let mut elapsed = T::zero();
    let grid = [T::zero(), options.chunk];
    let mut stepper = Dopri5::new(options.tolerances);
    while rhs_norm(&y, seed.omega_x, params) >= options.rhs_tol {
        if elapsed >= options.t_max {
            return Ok((MeanFieldState::from_slice(&y, seed.omega_x), false));
        }
        let mut noop = |_i: usize, _t: T, _y: &[T], _s: &mut System<T>| Ok(());
        stepper.integrate(&mut sys, &mut y, &grid, &mut noop)?;
        elapsed += options.chunk;
    }
    Ok((MeanFieldState::from_slice(&y, seed.omega_x), true))
}

/// Continuation scan: each point starts from the previous steady state.
/// `values` must be increasing for `Up` and decreasing for `Down`.
pub fn steady_state_scan<T: Real + OdeElem<T>>(
    param: ScanParameter,
    values: &[T],
    direction: Direction,
    params: &MeanFieldParams<T>,
    seed: &MeanFieldState<T>,
    options: &ScanOptions<T>,
) -> Result<Vec<BranchPoint<T>>> {
    let monotone = values.windows(2).all(|w| match direction {
        Direction::Up => w[1] > w[0],
        Direction::Down => w[1] < w[0],
    });
    if !monotone {
        return Err(Error::param(format!("scan values must be strictly monotone in the {} direction", direction.label())));
    }
    let mut current = *seed;
    let mut out = Vec::with_capacity(values.len());
    for &v in values {
        let mut p = *params;
        match param {
            ScanParameter::OmegaX => current.omega_x = v,
            ScanParameter::GammaR => p.gamma_r = v,
            ScanParameter::OmegaS => p.omega_s = v,
        }
        let (state, converged) = match relax(&current, &p, options) {
            Ok(r) => r,
            Err(Error::Integration(_)) => (current, false),
            Err(e) => return Err(e),
        };
        out.push(BranchPoint { param: v, state, converged, direction });
        current = state;
    }
    Ok(out)
}

/// Largest difference between two branches at matching parameter values.
pub fn branch_sup_distance<T: Real>(a: &[BranchPoint<T>], b: &[BranchPoint<T>]) -> Option<T> {
    let mut worst: Option<T> = None;
    for p in a {
        let tol = T::lit(1e-12) * (T::one() + p.param.abs());
        if let Some(q) = b.iter().find(|q| (q.param - p.param).abs() <= tol) {
            let d = p.state.to_vec().iter().zip(q.state.to_vec().iter()).map(|(x, y)| (*x - *y).abs()).fold(T::zero(), T::max);
            worst = Some(worst.map_or(d, |w: T| w.max(d)));
        }
    }
    worst
}

/// Hysteresis: the up and down branches differ somewhere by more than `1e-3`.
pub fn detect_hysteresis<T: Real>(up: &[BranchPoint<T>], down: &[BranchPoint<T>]) -> bool {
    branch_sup_distance(up, down).is_some_and(|d| d > T::lit(1e-3))
}

/// Largest jump of the transverse order parameter `|a_perp|` between neighbouring scan points.
pub fn max_order_parameter_jump<T: Real>(branch: &[BranchPoint<T>]) -> T {
    let op = |p: &BranchPoint<T>| p.state.a[0].hypot(p.state.a[1]);
    branch.windows(2).map(|w| (op(&w[1]) - op(&w[0])).abs()).fold(T::zero(), T::max)
}

pub fn write_branch_csv<T: Real>(out: &mut impl Write, branch: &[BranchPoint<T>]) -> std::io::Result<()> {
    writeln!(out, "{BRANCH_CSV_HEADER}")?;
    for p in branch {
        let v = p.state.to_vec();
        write!(out, "{}", p.param)?;
        for x in v {
            write!(out, ",{x}")?;
        }
        writeln!(out, ",{},{}", p.converged, p.direction.label())?;
    }
    Ok(())
}
