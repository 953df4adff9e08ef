// SPDX-License-Identifier: Apache-2.0

//! Adaptive Dormand-Prince 5(4) integration with per-step error control.
//!
//! The integrator steps through a prescribed output grid, shortening the
//! last step before each grid point so samples are taken on exact solution
//! points rather than interpolated.

use crate::error::IntegrationError;
use crate::scalar::{OdeElem, Real};

/// Right-hand side `dy = f(t, y)` of a first-order system.
pub trait OdeSystem<R: Real, E: OdeElem<R>> {
    fn rhs(&mut self, t: R, y: &[E], dy: &mut [E]);
}

/// Receives the solution at grid points and after every accepted step.
pub trait Observer<R: Real, E: OdeElem<R>, S> {
    fn sample(&mut self, index: usize, t: R, y: &[E], system: &mut S) -> Result<(), String>;

    /// Called after every accepted step; `dy` is the derivative at `(t, y)`.
    fn accepted(&mut self, _t: R, _y: &[E], _dy: &[E], _system: &mut S) -> Result<(), String> {
        Ok(())
    }
}

impl<R, E, S, F> Observer<R, E, S> for F
where
    R: Real,
    E: OdeElem<R>,
    F: FnMut(usize, R, &[E], &mut S) -> Result<(), String>,
{
    fn sample(&mut self, index: usize, t: R, y: &[E], system: &mut S) -> Result<(), String> {
        self(index, t, y, system)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances<R> {
    pub rtol: R,
    pub atol: R,
    /// Step sizes below `min_step_fraction * t_max` are treated as a collapse.
    pub min_step_fraction: R,
    pub max_steps: usize,
    pub max_step: Option<R>,
}

impl<R: Real> Default for Tolerances<R> {
    fn default() -> Self {
        Self {
            rtol: R::lit(1e-8),
            atol: R::lit(1e-10),
            min_step_fraction: R::lit(1e-12),
            max_steps: 50_000_000,
            max_step: None,
        }
    }
}

impl<R: Real> Tolerances<R> {
    pub fn new(rtol: R, atol: R) -> Self {
        Self { rtol, atol, ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

const CHUNK: usize = 1024;

// Dormand & Prince (1980) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Dormand-Prince 5(4) integrator with reusable stage buffers.
pub struct Dopri5<R: Real, E: OdeElem<R>> {
    pub tol: Tolerances<R>,
    k: [Vec<E>; 7],
    ytmp: Vec<E>,
    ynew: Vec<E>,
    err_prev: R,
    stats: Stats,
}

impl<R: Real, E: OdeElem<R>> Dopri5<R, E> {
    pub fn new(tol: Tolerances<R>) -> Self {
        Self {
            tol,
            k: Default::default(),
            ytmp: Vec::new(),
            ynew: Vec::new(),
            err_prev: R::lit(1e-4),
            stats: Stats::default(),
        }
    }

    pub fn stats(&self) -> Stats {
        self.stats
    }

    fn resize(&mut self, n: usize) {
        for k in &mut self.k {
            k.clear();
            k.resize(n, E::zero());
        }
        self.ytmp.clear();
        self.ytmp.resize(n, E::zero());
        self.ynew.clear();
        self.ynew.resize(n, E::zero());
    }

    fn scaled_norm(&self, y: &[E], v: &[E]) -> R {
        let mut acc = R::zero();
        for (yi, vi) in y.iter().zip(v) {
            let sc = self.tol.atol + self.tol.rtol * yi.magnitude();
            let r = vi.magnitude() / sc;
            acc += r * r;
        }
        (acc / R::from_usize(y.len().max(1)).unwrap()).sqrt()
    }

    fn initial_step<S: OdeSystem<R, E>>(&mut self, sys: &mut S, t: R, y: &[E], span: R) -> R {
        let d0 = self.scaled_norm(y, y);
        let d1 = self.scaled_norm(y, &self.k[0]);
        let mut h0 = if d0 < R::lit(1e-5) || d1 < R::lit(1e-5) {
            R::lit(1e-6)
        } else {
            R::lit(0.01) * d0 / d1
        };
        h0 = h0.min(span);
        for i in 0..y.len() {
            self.ytmp[i] = y[i] + self.k[0][i] * h0;
        }
        let (head, tail) = self.k.split_at_mut(1);
        sys.rhs(t + h0, &self.ytmp, &mut tail[0]);
        self.stats.rhs_evals += 1;
        let mut diff = std::mem::take(&mut self.ynew);
        for i in 0..y.len() {
            diff[i] = tail[0][i] - head[0][i];
        }
        let d2 = self.scaled_norm(y, &diff) / h0;
        self.ynew = diff;
        let dmax = d1.max(d2);
        let h1 = if dmax <= R::lit(1e-15) {
            (h0 * R::lit(1e-3)).max(R::lit(1e-6))
        } else {
            (R::lit(0.01) / dmax).powf(R::lit(0.2))
        };
        (R::lit(100.0) * h0).min(h1).min(span)
    }

    /// Integrates `y` from `grid[0]` through every grid point, calling the observer
    /// at each one. On return `y` holds the state at the last grid point.
    pub fn integrate<S, O>(
        &mut self,
        sys: &mut S,
        y: &mut [E],
        grid: &[R],
        observer: &mut O,
    ) -> Result<Stats, IntegrationError>
    where
        S: OdeSystem<R, E>,
        O: Observer<R, E, S>,
    {
        self.stats = Stats::default();
        if grid.is_empty() {
            return Ok(self.stats);
        }
        let n = y.len();
        self.resize(n);
        let mut t = grid[0];
        let t_end = *grid.last().unwrap();
        let span = (t_end - t).abs().max(R::min_positive_value());
        let h_min = self.tol.min_step_fraction * span;
        let h_max = self.tol.max_step.unwrap_or(span);
        let abort = |t: R, reason: String| IntegrationError::Aborted { last_good_time: t.to_f64_lossy(), reason };

        observer.sample(0, t, y, sys).map_err(|r| abort(t, r))?;
        if grid.len() == 1 {
            return Ok(self.stats);
        }

        sys.rhs(t, y, &mut self.k[0]);
        self.stats.rhs_evals += 1;
        let mut h = self.initial_step(sys, t, y, span).min(h_max);
        self.err_prev = R::lit(1e-4);

        let safety = R::lit(0.9);
        let beta = R::lit(0.04);
        let expo = R::lit(0.2) - beta * R::lit(0.75);

        for (gi, &t_target) in grid.iter().enumerate().skip(1) {
            while t < t_target {
                if self.stats.accepted + self.stats.rejected >= self.tol.max_steps {
                    return Err(IntegrationError::MaxSteps {
                        last_good_time: t.to_f64_lossy(),
                        max_steps: self.tol.max_steps,
                    });
                }
                let remaining = t_target - t;
                let hits = h >= remaining * R::lit(0.999_999);
                let h_try = if hits { remaining } else { h };
                if h_try < h_min && !hits {
                    return Err(IntegrationError::StepTooSmall {
                        last_good_time: t.to_f64_lossy(),
                        step: h_try.to_f64_lossy(),
                    });
                }

                for s in 1..7 {
                    let (done, rest) = self.k.split_at_mut(s);
                    let dst = if s == 6 { &mut self.ynew } else { &mut self.ytmp };
                    let coef: Vec<(usize, R)> = A[s][..s]
                        .iter()
                        .enumerate()
                        .filter(|(_, a)| **a != 0.0)
                        .map(|(j, a)| (j, h_try * R::lit(*a)))
                        .collect();
                    // Chunked so every stage vector is streamed once per stage.
                    for start in (0..n).step_by(CHUNK) {
                        let end = (start + CHUNK).min(n);
                        let d = &mut dst[start..end];
                        d.copy_from_slice(&y[start..end]);
                        for &(j, f) in &coef {
                            for (di, k) in d.iter_mut().zip(&done[j][start..end]) {
                                *di = *di + *k * f;
                            }
                        }
                    }
                    sys.rhs(t + h_try * R::lit(C[s]), dst, &mut rest[0]);
                    self.stats.rhs_evals += 1;
                }

                // Error estimate, accumulated into ytmp.
                let err_coef: Vec<(usize, R)> =
                    E.iter().enumerate().filter(|(_, c)| **c != 0.0).map(|(j, c)| (j, h_try * R::lit(*c))).collect();
                let err_vec = &mut self.ytmp;
                for start in (0..n).step_by(CHUNK) {
                    let end = (start + CHUNK).min(n);
                    let e = &mut err_vec[start..end];
                    e.iter_mut().for_each(|v| *v = E::zero());
                    for &(j, f) in &err_coef {
                        for (ei, k) in e.iter_mut().zip(&self.k[j][start..end]) {
                            *ei = *ei + *k * f;
                        }
                    }
                }
                let mut acc = R::zero();
                let mut finite = true;
                for ((e, yn), yo) in err_vec.iter().zip(&self.ynew).zip(y.iter()) {
                    finite &= yn.is_finite_elem();
                    let sc = self.tol.atol + self.tol.rtol * yo.magnitude().max(yn.magnitude());
                    let r = e.magnitude() / sc;
                    acc += r * r;
                }
                if !finite {
                    if h_try <= h_min {
                        return Err(IntegrationError::NonFinite { last_good_time: t.to_f64_lossy() });
                    }
                    h = h_try * R::lit(0.25);
                    self.stats.rejected += 1;
                    continue;
                }
                let err = (acc / R::from_usize(n.max(1)).unwrap()).sqrt();

                if err <= R::one() {
                    let err_c = err.max(R::lit(1e-10));
                    let fac = err_c.powf(-expo) * self.err_prev.powf(beta) * safety;
                    let fac = fac.max(R::lit(0.2)).min(R::lit(5.0));
                    self.err_prev = err_c.max(R::lit(1e-4));
                    t = if hits { t_target } else { t + h_try };
                    y.copy_from_slice(&self.ynew);
                    self.k.swap(0, 6);
                    self.stats.accepted += 1;
                    observer.accepted(t, y, &self.k[0], sys).map_err(|r| abort(t, r))?;
                    // A grid-clamped step says little about the natural step size.
                    h = if hits { h.max(h_try * fac) } else { h_try * fac };
                    h = h.min(h_max);
                } else {
                    let fac = (safety * err.powf(-R::lit(0.2))).max(R::lit(0.2));
                    h = h_try * fac;
                    self.stats.rejected += 1;
                }
            }
            observer.sample(gi, t, y, sys).map_err(|r| abort(t, r))?;
        }
        Ok(self.stats)
    }
}

/// Convenience wrapper: integrate with default buffers, no step observer.
pub fn integrate<R, E, S, O>(
    tol: Tolerances<R>,
    sys: &mut S,
    y: &mut [E],
    grid: &[R],
    observer: &mut O,
) -> Result<Stats, IntegrationError>
where
    R: Real,
    E: OdeElem<R>,
    S: OdeSystem<R, E>,
    O: Observer<R, E, S>,
{
    Dopri5::new(tol).integrate(sys, y, grid, observer)
}

/// Uniform grid `0, dt, ..., t_max` with `samples` intervals.
pub fn uniform_grid<R: Real>(t_max: R, samples: usize) -> Vec<R> {
    let n = samples.max(1);
    (0..=n)
        .map(|i| t_max * R::from_usize(i).unwrap() / R::from_usize(n).unwrap())
        .collect()
}

pub fn validate_grid<R: Real>(grid: &[R]) -> Result<(), crate::Error> {
    if grid.is_empty() {
        return Err(crate::Error::param("time grid is empty"));
    }
    if grid[0] != R::zero() {
        return Err(crate::Error::param("time grid must start at 0"));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(crate::Error::param("time grid must be strictly increasing"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    struct Decay(f64);
    impl OdeSystem<f64, f64> for Decay {
        fn rhs(&mut self, _t: f64, y: &[f64], dy: &mut [f64]) {
            dy[0] = -self.0 * y[0];
        }
    }

    struct Rotor;
    impl OdeSystem<f64, Complex64> for Rotor {
        fn rhs(&mut self, _t: f64, y: &[Complex64], dy: &mut [Complex64]) {
            dy[0] = Complex64::new(0.0, -2.0) * y[0];
        }
    }

    struct DecayF32;
    impl OdeSystem<f32, f32> for DecayF32 {
        fn rhs(&mut self, _t: f32, y: &[f32], dy: &mut [f32]) {
            dy[0] = -y[0];
        }
    }

    #[test]
    fn exponential_decay_hits_grid_points() {
        let grid = uniform_grid(5.0, 10);
        let mut y = [1.0];
        let mut seen = Vec::new();
        let mut obs = |_i: usize, t: f64, y: &[f64], _s: &mut Decay| {
            seen.push((t, y[0]));
            Ok(())
        };
        integrate(Tolerances::default(), &mut Decay(1.3), &mut y, &grid, &mut obs).unwrap();
        assert_eq!(seen.len(), grid.len());
        for ((t, v), g) in seen.iter().zip(&grid) {
            assert_eq!(t, g);
            assert!((v - (-1.3 * t).exp()).abs() < 1e-8);
        }
    }

    #[test]
    fn complex_rotation_keeps_modulus() {
        let grid = uniform_grid(20.0, 4);
        let mut y = [Complex64::new(1.0, 0.0)];
        let mut noop = |_: usize, _: f64, _: &[Complex64], _: &mut Rotor| Ok(());
        integrate(Tolerances::new(1e-10, 1e-12), &mut Rotor, &mut y, &grid, &mut noop).unwrap();
        let exact = Complex64::from_polar(1.0, -40.0);
        assert!((y[0] - exact).norm() < 1e-7);
    }

    #[test]
    fn single_precision_path() {
        let grid = uniform_grid(2.0f32, 4);
        let mut y = [1.0f32];
        let mut noop = |_: usize, _: f32, _: &[f32], _: &mut DecayF32| Ok(());
        let tol = Tolerances::new(1e-5f32, 1e-7);
        integrate(tol, &mut DecayF32, &mut y, &grid, &mut noop).unwrap();
        assert!((y[0] - (-2.0f32).exp()).abs() < 1e-4);
    }

    #[test]
    fn observer_abort_carries_time() {
        let grid = uniform_grid(1.0, 4);
        let mut y = [1.0];
        let mut obs = |i: usize, _: f64, _: &[f64], _: &mut Decay| if i == 2 { Err("stop".into()) } else { Ok(()) };
        let err = integrate(Tolerances::default(), &mut Decay(1.0), &mut y, &grid, &mut obs).unwrap_err();
        assert_eq!(err.last_good_time(), 0.5);
    }

    #[test]
    fn grid_validation() {
        assert!(validate_grid(&[0.0, 1.0, 2.0]).is_ok());
        assert!(validate_grid(&[0.0, 1.0, 1.0]).is_err());
        assert!(validate_grid(&[0.5, 1.0]).is_err());
        assert!(validate_grid::<f64>(&[]).is_err());
    }
}
