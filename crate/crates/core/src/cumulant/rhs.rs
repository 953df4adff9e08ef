// SPDX-License-Identifier: Apache-2.0

//! Closed moment equations, `O(N^2)` per evaluation.
//!
//! Hoisted contractions (`g_k` the normalized couplings):
//! `Z = sum_k g_k (gamma+_kk - 1/2)`, `X = sum_k g_k chi_k`,
//! `a_j = sum_k g_k gamma+_kj`, `b_i = sum_k gamma+_ik g_k chi_k`,
//! `c_i = sum_k gamma-_ik g_k`.
//!
//! Factorized moments:
//! `T_ik = <sigma_i^+ sigma_k^z S^->` = `(gamma+_kk - 1/2) chi_i - gamma+_ik chi_k` (`k != i`), `-chi_i/2` (`k = i`);
//! `U_ij = sum_k g_k <sigma_k^+ sigma_i^+ sigma_j^- S^->` = `chi_i a_j + gamma+_ij (X - 2 g_i chi_i - 2 g_j chi_j)` (`i != j`),
//! `gamma+_ii X - chi_i a_i` (`i = j`).
//! `gamma-` is propagated through `M = gamma- + gamma+/2 = <sigma_i^+ sigma_j^- S^+S^->`.

use num_complex::Complex64;

use super::{CumulantLayout, CumulantState};
use crate::ode::OdeSystem;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Electron splitting at each evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Splitting {
    Fixed(f64),
    /// `omega_S = target - g <A^z>`.
    Compensated(f64),
}

pub struct CumulantSystem {
    pub layout: CumulantLayout,
    pub g: f64,
    pub couplings: Vec<f64>,
    pub gamma_r: f64,
    pub splitting: Splitting,
    /// Pin every inter-site correlation at zero: independent emitters.
    pub independent: bool,
    a: Vec<Complex64>,
    b: Vec<Complex64>,
    c: Vec<Complex64>,
    diag: Vec<Complex64>,
}

impl CumulantSystem {
    pub fn new(g: f64, couplings: Vec<f64>, gamma_r: f64, splitting: Splitting) -> Self {
        let n = couplings.len();
        let z = vec![Complex64::new(0.0, 0.0); n];
        Self {
            layout: CumulantLayout { n },
            g,
            couplings,
            gamma_r,
            splitting,
            independent: false,
            a: z.clone(),
            b: z.clone(),
            c: z,
            diag: Vec::with_capacity(n),
        }
    }

    pub fn a_z(&self, y: &[Complex64]) -> f64 {
        let l = self.layout;
        self.couplings.iter().enumerate().map(|(k, gk)| gk * (y[l.gp(k, k)].re - 0.5)).sum()
    }

    pub fn omega(&self, y: &[Complex64]) -> f64 {
        match self.splitting {
            Splitting::Fixed(w) => w,
            Splitting::Compensated(target) => crate::control::compensated_omega(self.a_z(y), target, self.g),
        }
    }

    pub fn evaluate(&mut self, y: &[Complex64], dy: &mut [Complex64]) {
        if self.independent {
            let l = self.layout;
            for i in 0..l.n {
                for j in (0..l.n).filter(|j| *j != i) {
                    dy[l.gp(i, j)] = Complex64::new(0.0, 0.0);
                    dy[l.gm(i, j)] = Complex64::new(0.0, 0.0);
                }
            }
        }
        self.evaluate_local(y, dy);
    }

    /// In independent mode only `s_z`, `chi` and the diagonals are read and written.
    fn evaluate_local(&mut self, y: &[Complex64], dy: &mut [Complex64]) {
        let l = self.layout;
        let n = l.n;
        let g = self.g;
        let gi = &self.couplings;
        let gam = self.gamma_r;
        let s_z = y[0].re;
        let chi = &y[1..1 + n];
        let gp = |i: usize, j: usize| y[l.gp(i, j)];
        let gm = |i: usize, j: usize| y[l.gm(i, j)];
        let omega = self.omega(y);
        let zf: f64 = (0..n).map(|k| gi[k] * (gp(k, k).re - 0.5)).sum();
        let x: Complex64 = (0..n).map(|k| chi[k] * gi[k]).sum();
        let gchi: Vec<Complex64> = (0..n).map(|k| chi[k] * gi[k]).collect();
        if self.independent {
            for i in 0..n {
                let d = y[l.gp(i, i)];
                self.a[i] = d * gi[i];
                self.b[i] = d * gchi[i];
                self.c[i] = y[l.gm(i, i)] * gi[i];
            }
        } else {
            self.a.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
            for i in 0..n {
                let row = l.gp(i, 0);
                let rowm = l.gm(i, 0);
                let (mut b, mut c) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
                for k in 0..n {
                    let v = y[row + k];
                    // a_k += g_i gamma+_ik
                    self.a[k] += v * gi[i];
                    b += v * gchi[k];
                    c += y[rowm + k] * gi[k];
                }
                self.b[i] = b;
                self.c[i] = c;
            }
        }

        dy[0] = Complex64::new(-gam * (0.5 + s_z) - g * x.im, 0.0);
        for i in 0..n {
            let lin = Complex64::new(0.5 * gam, omega + 0.5 * g * gi[i]);
            let local = 0.5 * (gp(i, i) - 0.5) + gm(i, i) - 0.5 * s_z;
            dy[1 + i] = -lin * chi[i] - I * g * (chi[i] * zf - self.b[i]) + I * g * (self.c[i] - local * gi[i]);
        }
        // Upper triangle from row i only: the state is exactly Hermitian, so
        // gamma_ji = conj(gamma_ij).
        let a = &self.a;
        self.diag.clear();
        self.diag.extend((0..n).map(|k| y[l.gp(k, k)] - 0.5));
        let diag = &self.diag;
        let (dy_head, dy_gm) = dy.split_at_mut(l.gm(0, 0));
        let dy_gp = &mut dy_head[l.gp(0, 0)..];
        for i in 0..n {
            let prow = &y[l.gp(i, 0)..l.gp(i, 0) + n];
            let mrow = &y[l.gm(i, 0)..l.gm(i, 0) + n];
            let dprow = &mut dy_gp[i * n..(i + 1) * n];
            let dmrow = &mut dy_gm[i * n..(i + 1) * n];
            let (chi_i, a_i, g_i, gii) = (chi[i], a[i], gi[i], diag[i]);
            let xi = x - 2.0 * gchi[i];
            {
                let t = -0.5 * chi_i;
                let u = prow[i] * x - chi_i * a_i;
                let dg = I * g * g_i * (t - t.conj());
                let mij = mrow[i] + 0.5 * prow[i];
                let dm = I * (0.5 * g) * (u - u.conj()) - gam * mij;
                dprow[i] = Complex64::new(dg.re, 0.0);
                dmrow[i] = Complex64::new((dm - 0.5 * dg).re, 0.0);
            }
            if self.independent {
                continue;
            }
            let ig = I * g;
            let ihg = I * (0.5 * g);
            for j in i + 1..n {
                let pij = prow[j];
                let pji = pij.conj();
                let (chi_j, g_j) = (chi[j], gi[j]);
                let w = xi - 2.0 * gchi[j];
                let t_ij = diag[j] * chi_i - pij * chi_j;
                let t_ji = gii * chi_j - pji * chi_i;
                let u_ij = chi_i * a[j] + pij * w;
                let u_ji = chi_j * a_i + pji * w;
                let dgi = g_i - g_j;
                let dg = ig * (mrow[j] * dgi + t_ij * g_j - t_ji.conj() * g_i);
                let mij = mrow[j] + 0.5 * pij;
                let dm = ihg * ((u_ij - u_ji.conj()) + mij * dgi) - gam * mij;
                dprow[j] = dg;
                dmrow[j] = dm - 0.5 * dg;
            }
        }
        if !self.independent {
            mirror_lower(&mut dy[l.gp(0, 0)..l.gp(0, 0) + n * n], n);
            mirror_lower(&mut dy[l.gm(0, 0)..l.gm(0, 0) + n * n], n);
        }
    }

    /// `d/dt (S^+S^- + sum_i n_i) + I`, zero up to rounding for the implemented equations.
    pub fn bookkeeping_residual(&self, y: &[Complex64], dy: &[Complex64]) -> f64 {
        let l = self.layout;
        let dexc = dy[0].re + (0..l.n).map(|i| dy[l.gp(i, i)].re).sum::<f64>();
        (dexc + self.gamma_r * (0.5 + y[0].re)).abs()
    }

    pub fn state(&self, y: &[Complex64]) -> CumulantState {
        CumulantState::unpack(self.layout.n, y)
    }
}

/// Independent-emitter equations on the compact state `[s_z, chi, gamma+_ii, gamma-_ii]`.
pub struct IndependentSystem {
    inner: CumulantSystem,
    y: Vec<Complex64>,
    dy: Vec<Complex64>,
}

impl IndependentSystem {
    pub fn new(mut inner: CumulantSystem) -> Self {
        inner.independent = true;
        let len = inner.layout.len();
        Self { inner, y: vec![Complex64::new(0.0, 0.0); len], dy: vec![Complex64::new(0.0, 0.0); len] }
    }

    pub fn compact_len(&self) -> usize {
        1 + 3 * self.inner.layout.n
    }

    pub fn compress(&self, full: &[Complex64]) -> Vec<Complex64> {
        let l = self.inner.layout;
        let mut out = full[..1 + l.n].to_vec();
        out.extend((0..l.n).map(|i| full[l.gp(i, i)]));
        out.extend((0..l.n).map(|i| full[l.gm(i, i)]));
        out
    }

    pub fn expand(&mut self, compact: &[Complex64]) -> &[Complex64] {
        let l = self.inner.layout;
        let n = l.n;
        self.y[..1 + n].copy_from_slice(&compact[..1 + n]);
        for i in 0..n {
            self.y[l.gp(i, i)] = compact[1 + n + i];
            self.y[l.gm(i, i)] = compact[1 + 2 * n + i];
        }
        &self.y
    }

    pub fn system(&self) -> &CumulantSystem {
        &self.inner
    }
}

impl OdeSystem<f64, Complex64> for IndependentSystem {
    fn rhs(&mut self, _t: f64, y: &[Complex64], dy: &mut [Complex64]) {
        let n = self.inner.layout.n;
        self.expand(y);
        self.inner.evaluate_local(&self.y, &mut self.dy);
        let l = self.inner.layout;
        dy[..1 + n].copy_from_slice(&self.dy[..1 + n]);
        for i in 0..n {
            dy[1 + n + i] = self.dy[l.gp(i, i)];
            dy[1 + 2 * n + i] = self.dy[l.gm(i, i)];
        }
    }
}

/// Fills the strict lower triangle with the conjugate transpose of the upper one, tile by tile.
fn mirror_lower(m: &mut [Complex64], n: usize) {
    const TILE: usize = 32;
    for bi in (0..n).step_by(TILE) {
        for bj in (0..=bi).step_by(TILE) {
            for i in bi..(bi + TILE).min(n) {
                for j in bj..(bj + TILE).min(i) {
                    m[i * n + j] = m[j * n + i].conj();
                }
            }
        }
    }
}

impl OdeSystem<f64, Complex64> for CumulantSystem {
    fn rhs(&mut self, _t: f64, y: &[Complex64], dy: &mut [Complex64]) {
        self.evaluate(y, dy);
    }
}
