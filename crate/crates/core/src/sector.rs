// SPDX-License-Identifier: Apache-2.0

//! Block-sparse Lindblad propagation.
//!
//! States are grouped into sectors (for isotropic couplings: fixed total
//! excitation). The Hamiltonian is block diagonal over sectors and the jump
//! operator moves population from one sector into another, so a density
//! matrix that starts block diagonal stays block diagonal and only the
//! blocks are stored. Operators act through CSR blocks; no superoperator
//! is ever formed.

use std::collections::BTreeMap;
use std::ops::Range;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::ode::OdeSystem;
use crate::sparse::Csr;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const MINUS_I: Complex64 = Complex64::new(0.0, -1.0);

/// Dense density matrix over a basis whose labels are `0..dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    pub dim: usize,
    /// Row-major entries.
    pub entries: Vec<Complex64>,
    pub basis: BasisTag,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisTag {
    /// Electron plus nuclei, bit-indexed (see [`crate::conventions`]).
    Product,
    /// `|J, m> (x) {down, up}` with index `2 (m + J) + e`.
    Collective,
    /// Nuclei only, bit `i` is nucleus `i`.
    Nuclear,
}

impl DensityMatrix {
    pub fn zeros(dim: usize, basis: BasisTag) -> Self {
        Self { dim, entries: vec![ZERO; dim * dim], basis }
    }

    pub fn pure(amplitudes: &[Complex64], basis: BasisTag) -> Self {
        let dim = amplitudes.len();
        let mut m = Self::zeros(dim, basis);
        for a in 0..dim {
            for b in 0..dim {
                m.entries[a * dim + b] = amplitudes[a] * amplitudes[b].conj();
            }
        }
        m
    }

    pub fn basis_state(dim: usize, index: usize, basis: BasisTag) -> Self {
        let mut m = Self::zeros(dim, basis);
        m.entries[index * dim + index] = ONE;
        m
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> Complex64 {
        self.entries[a * self.dim + b]
    }

    #[inline]
    pub fn set(&mut self, a: usize, b: usize, v: Complex64) {
        self.entries[a * self.dim + b] = v;
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|a| self.get(a, a)).sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for a in 0..self.dim {
            for b in a..self.dim {
                worst = worst.max((self.get(a, b) - self.get(b, a).conj()).norm());
            }
        }
        worst
    }

    pub fn purity(&self) -> f64 {
        let mut acc = 0.0;
        for a in 0..self.dim {
            for b in 0..self.dim {
                acc += (self.get(a, b) * self.get(b, a)).re;
            }
        }
        acc
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.entries, self.dim)
    }

    /// `tr(O rho)` for a sparse operator over the same basis.
    pub fn expect(&self, op: &Csr) -> Complex64 {
        let mut acc = ZERO;
        for a in 0..op.rows {
            for (b, v) in op.row(a) {
                acc += v * self.get(b, a);
            }
        }
        acc
    }

    pub fn l1_norm(&self) -> f64 {
        self.entries.iter().map(|v| v.norm()).sum()
    }
}

/// Smallest eigenvalue of a Hermitian row-major block.
pub fn min_eigenvalue(block: &[Complex64], dim: usize) -> f64 {
    if dim == 0 {
        return 0.0;
    }
    let m = nalgebra::DMatrix::from_row_slice(dim, dim, block);
    let herm = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
    herm.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

/// Basis states grouped by sector; state labels are `0..dim`.
#[derive(Debug, Clone)]
pub struct Basis {
    pub dim: usize,
    pub tag: BasisTag,
    /// Label order: sector by sector.
    pub order: Vec<usize>,
    pub ranges: Vec<Range<usize>>,
    /// `label -> (sector, local index)`.
    pub position: Vec<(usize, usize)>,
}

impl Basis {
    /// Groups labels `0..dim` by the key function (sectors sorted by key).
    pub fn grouped(dim: usize, tag: BasisTag, key: impl Fn(usize) -> i64) -> Self {
        let mut groups: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
        for s in 0..dim {
            groups.entry(key(s)).or_default().push(s);
        }
        let mut order = Vec::with_capacity(dim);
        let mut ranges = Vec::with_capacity(groups.len());
        let mut position = vec![(0, 0); dim];
        for (sector, (_, members)) in groups.into_iter().enumerate() {
            let start = order.len();
            for (local, s) in members.into_iter().enumerate() {
                position[s] = (sector, local);
                order.push(s);
            }
            ranges.push(start..order.len());
        }
        Self { dim, tag, order, ranges, position }
    }

    /// Everything in one sector (needed when couplings break excitation conservation).
    pub fn single(dim: usize, tag: BasisTag) -> Self {
        Self::grouped(dim, tag, |_| 0)
    }

    pub fn sectors(&self) -> usize {
        self.ranges.len()
    }

    pub fn sector_dim(&self, s: usize) -> usize {
        self.ranges[s].len()
    }

    pub fn label(&self, sector: usize, local: usize) -> usize {
        self.order[self.ranges[sector].start + local]
    }

    /// Offsets of each sector block in the flat state vector.
    pub fn block_offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.sectors() + 1);
        let mut acc = 0;
        off.push(0);
        for s in 0..self.sectors() {
            acc += self.sector_dim(s) * self.sector_dim(s);
            off.push(acc);
        }
        off
    }

    /// Splits global triplets into `(target sector, source sector) -> Csr` blocks.
    pub fn split(&self, triplets: &[(usize, usize, Complex64)]) -> Vec<(usize, usize, Csr)> {
        let mut by_block: BTreeMap<(usize, usize), Vec<(usize, usize, Complex64)>> = BTreeMap::new();
        for &(r, c, v) in triplets {
            let (sr, lr) = self.position[r];
            let (sc, lc) = self.position[c];
            by_block.entry((sr, sc)).or_default().push((lr, lc, v));
        }
        by_block
            .into_iter()
            .map(|((t, s), trip)| (t, s, Csr::from_triplets(self.sector_dim(t), self.sector_dim(s), trip)))
            .collect()
    }

    /// Block-diagonal operator; errors if any triplet couples two sectors.
    pub fn split_diagonal(&self, triplets: &[(usize, usize, Complex64)]) -> Result<Vec<Csr>> {
        let mut out: Vec<Csr> = (0..self.sectors())
            .map(|s| Csr::from_triplets(self.sector_dim(s), self.sector_dim(s), Vec::new()))
            .collect();
        for (t, s, m) in self.split(triplets) {
            if t != s {
                return Err(Error::param("operator couples different sectors"));
            }
            out[t] = m;
        }
        Ok(out)
    }

    pub fn diag_per_sector(&self, values: impl Fn(usize) -> f64) -> Vec<Vec<f64>> {
        (0..self.sectors())
            .map(|s| self.ranges[s].clone().map(|k| values(self.order[k])).collect())
            .collect()
    }
}

/// How `omega_S` enters the Hamiltonian at each right-hand-side evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Drive {
    None,
    Fixed(f64),
    /// `omega_S = target - g <A^z>`.
    Compensated { target: f64, g: f64 },
}

/// Everything needed to assemble a [`BlockLindblad`].
pub struct LindbladSpec {
    pub basis: Basis,
    /// Static Hamiltonian, global labels.
    pub hamiltonian: Vec<(usize, usize, Complex64)>,
    /// Diagonal of the operator multiplying `omega_S` (the electron `S^z`).
    pub zeeman: Vec<f64>,
    pub drive: Drive,
    pub jump: Vec<(usize, usize, Complex64)>,
    /// `L^dagger L`.
    pub jump_norm: Vec<(usize, usize, Complex64)>,
    pub rate: f64,
    pub a_z: Vec<f64>,
    pub a_plus_minus: Vec<(usize, usize, Complex64)>,
    pub excitation: Vec<f64>,
    pub conserves_excitation: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Observation {
    pub trace: f64,
    pub intensity: f64,
    pub a_z: f64,
    pub a_plus_minus: f64,
    pub excitation: f64,
    pub omega_s: f64,
}

/// Block-sparse Lindblad generator `-i[H, rho] + rate (L rho L^+ - {L^+L, rho}/2)`.
pub struct BlockLindblad {
    pub basis: Basis,
    offsets: Vec<usize>,
    h_eff: Vec<Csr>,
    h_static: Vec<Csr>,
    zeeman: Vec<Vec<f64>>,
    jumps: Vec<(usize, usize, Csr)>,
    jump_norm: Vec<Csr>,
    rate: f64,
    pub drive: Drive,
    a_z: Vec<Vec<f64>>,
    a_plus_minus: Vec<Csr>,
    excitation: Vec<Vec<f64>>,
    pub conserves_excitation: bool,
    /// When true the generator assumes Hermitian input and uses `rho H^+ = (H rho)^+`.
    pub assume_hermitian: bool,
    scratch: Vec<Complex64>,
    scratch2: Vec<Complex64>,
}

impl BlockLindblad {
    pub fn new(spec: LindbladSpec) -> Result<Self> {
        let basis = spec.basis;
        if spec.zeeman.len() != basis.dim || spec.a_z.len() != basis.dim || spec.excitation.len() != basis.dim {
            return Err(Error::Dimension { expected: basis.dim, got: spec.zeeman.len() });
        }
        let h_static = basis.split_diagonal(&spec.hamiltonian)?;
        let jump_norm = basis.split_diagonal(&spec.jump_norm)?;
        let mut h_trip = spec.hamiltonian.clone();
        for &(r, c, v) in &spec.jump_norm {
            h_trip.push((r, c, Complex64::new(0.0, -0.5 * spec.rate) * v));
        }
        let h_eff = basis.split_diagonal(&h_trip)?;
        let jumps = basis.split(&spec.jump);
        let zeeman = basis.diag_per_sector(|s| spec.zeeman[s]);
        let a_z = basis.diag_per_sector(|s| spec.a_z[s]);
        let excitation = basis.diag_per_sector(|s| spec.excitation[s]);
        let a_plus_minus = basis.split_diagonal(&spec.a_plus_minus)?;
        let max_dim = (0..basis.sectors()).map(|s| basis.sector_dim(s)).max().unwrap_or(0);
        let offsets = basis.block_offsets();
        Ok(Self {
            basis,
            offsets,
            h_eff,
            h_static,
            zeeman,
            jumps,
            jump_norm,
            rate: spec.rate,
            drive: spec.drive,
            a_z,
            a_plus_minus,
            excitation,
            conserves_excitation: spec.conserves_excitation,
            assume_hermitian: true,
            scratch: vec![ZERO; max_dim * max_dim],
            scratch2: vec![ZERO; max_dim * max_dim],
        })
    }

    pub fn state_len(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    fn block<'a>(&self, y: &'a [Complex64], s: usize) -> &'a [Complex64] {
        &y[self.offsets[s]..self.offsets[s + 1]]
    }

    /// Packs a dense matrix into blocks; entries outside the blocks must vanish.
    pub fn pack(&self, rho: &DensityMatrix) -> Result<Vec<Complex64>> {
        if rho.dim != self.basis.dim {
            return Err(Error::Dimension { expected: self.basis.dim, got: rho.dim });
        }
        let mut y = vec![ZERO; self.state_len()];
        let mut packed_norm = 0.0;
        for s in 0..self.basis.sectors() {
            let d = self.basis.sector_dim(s);
            for a in 0..d {
                for b in 0..d {
                    let v = rho.get(self.basis.label(s, a), self.basis.label(s, b));
                    packed_norm += v.norm();
                    y[self.offsets[s] + a * d + b] = v;
                }
            }
        }
        let total = rho.l1_norm();
        if total - packed_norm > 1e-12 * total.max(1.0) {
            return Err(Error::param("density matrix has coherences between conserved sectors"));
        }
        Ok(y)
    }

    pub fn unpack(&self, y: &[Complex64]) -> DensityMatrix {
        let mut rho = DensityMatrix::zeros(self.basis.dim, self.basis.tag);
        for s in 0..self.basis.sectors() {
            let d = self.basis.sector_dim(s);
            let blk = self.block(y, s);
            for a in 0..d {
                for b in 0..d {
                    rho.set(self.basis.label(s, a), self.basis.label(s, b), blk[a * d + b]);
                }
            }
        }
        rho
    }

    fn diag_expect(&self, y: &[Complex64], diag: &[Vec<f64>]) -> f64 {
        let mut acc = 0.0;
        for (s, dv) in diag.iter().enumerate() {
            let d = dv.len();
            let blk = self.block(y, s);
            for (a, v) in dv.iter().enumerate() {
                acc += v * blk[a * d + a].re;
            }
        }
        acc
    }

    fn sparse_expect(&self, y: &[Complex64], ops: &[Csr]) -> f64 {
        let mut acc = ZERO;
        for (s, op) in ops.iter().enumerate() {
            let d = op.rows;
            let blk = self.block(y, s);
            for a in 0..d {
                for (b, v) in op.row(a) {
                    acc += v * blk[b * d + a];
                }
            }
        }
        acc.re
    }

    pub fn a_z(&self, y: &[Complex64]) -> f64 {
        self.diag_expect(y, &self.a_z)
    }

    pub fn omega(&self, y: &[Complex64]) -> f64 {
        match self.drive {
            Drive::None => 0.0,
            Drive::Fixed(w) => w,
            Drive::Compensated { target, g } => target - g * self.a_z(y),
        }
    }

    pub fn observe(&self, y: &[Complex64]) -> Observation {
        let mut trace = 0.0;
        for s in 0..self.basis.sectors() {
            let d = self.basis.sector_dim(s);
            let blk = self.block(y, s);
            trace += (0..d).map(|a| blk[a * d + a].re).sum::<f64>();
        }
        Observation {
            trace,
            intensity: self.rate * self.sparse_expect(y, &self.jump_norm),
            a_z: self.a_z(y),
            a_plus_minus: self.sparse_expect(y, &self.a_plus_minus),
            excitation: self.diag_expect(y, &self.excitation),
            omega_s: self.omega(y),
        }
    }

    /// `d<excitation>/dt` read off a right-hand side.
    pub fn excitation_rate(&self, dy: &[Complex64]) -> f64 {
        self.diag_expect(dy, &self.excitation)
    }

    pub fn trace_rate(&self, dy: &[Complex64]) -> f64 {
        let mut acc = 0.0;
        for s in 0..self.basis.sectors() {
            let d = self.basis.sector_dim(s);
            let blk = self.block(dy, s);
            acc += (0..d).map(|a| blk[a * d + a].re).sum::<f64>();
        }
        acc
    }

    pub fn min_eigenvalue(&self, y: &[Complex64]) -> f64 {
        (0..self.basis.sectors())
            .map(|s| min_eigenvalue(self.block(y, s), self.basis.sector_dim(s)))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn hermiticity_error(&self, y: &[Complex64]) -> f64 {
        let mut worst = 0.0f64;
        for s in 0..self.basis.sectors() {
            let d = self.basis.sector_dim(s);
            let blk = self.block(y, s);
            for a in 0..d {
                for b in a..d {
                    worst = worst.max((blk[a * d + b] - blk[b * d + a].conj()).norm());
                }
            }
        }
        worst
    }

    pub fn purity(&self, y: &[Complex64]) -> f64 {
        let mut acc = 0.0;
        for s in 0..self.basis.sectors() {
            let d = self.basis.sector_dim(s);
            let blk = self.block(y, s);
            for a in 0..d {
                for b in 0..d {
                    acc += (blk[a * d + b] * blk[b * d + a]).re;
                }
            }
        }
        acc
    }

    /// Static Hamiltonian (without the `omega_S` term) as dense sector blocks.
    pub fn hamiltonian_blocks(&self) -> &[Csr] {
        &self.h_static
    }

    pub fn evaluate(&mut self, y: &[Complex64], dy: &mut [Complex64]) {
        let omega = self.omega(y);
        dy.iter_mut().for_each(|v| *v = ZERO);
        for s in 0..self.basis.sectors() {
            let d = self.basis.sector_dim(s);
            if d == 0 {
                continue;
            }
            let (lo, hi) = (self.offsets[s], self.offsets[s + 1]);
            let rho = &y[lo..hi];
            let out = &mut dy[lo..hi];
            let tmp = &mut self.scratch[..d * d];
            tmp.iter_mut().for_each(|v| *v = ZERO);
            self.h_eff[s].mul_dense_acc(rho, d, ONE, tmp);
            let z = &self.zeeman[s];
            if omega != 0.0 {
                for a in 0..d {
                    let za = Complex64::new(omega * z[a], 0.0);
                    if za != ZERO {
                        for b in 0..d {
                            tmp[a * d + b] += za * rho[a * d + b];
                        }
                    }
                }
            }
            if self.assume_hermitian {
                for a in 0..d {
                    for b in 0..d {
                        out[a * d + b] = MINUS_I * (tmp[a * d + b] - tmp[b * d + a].conj());
                    }
                }
            } else {
                // rho H_eff^+ computed explicitly.
                let tmp2 = &mut self.scratch2[..d * d];
                tmp2.iter_mut().for_each(|v| *v = ZERO);
                self.h_eff[s].dense_mul_adjoint_acc(rho, d, ONE, tmp2);
                if omega != 0.0 {
                    for a in 0..d {
                        for b in 0..d {
                            tmp2[a * d + b] += rho[a * d + b] * (omega * z[b]);
                        }
                    }
                }
                for k in 0..d * d {
                    out[k] = MINUS_I * (tmp[k] - tmp2[k]);
                }
            }
        }
        for (t, src, op) in &self.jumps {
            let (dt, ds) = (op.rows, op.cols);
            let rho = &y[self.offsets[*src]..self.offsets[*src + 1]];
            let w = &mut self.scratch[..dt * ds];
            w.iter_mut().for_each(|v| *v = ZERO);
            op.mul_dense_acc(rho, ds, ONE, w);
            let out = &mut dy[self.offsets[*t]..self.offsets[*t + 1]];
            op.dense_mul_adjoint_acc(w, dt, Complex64::new(self.rate, 0.0), out);
        }
    }
}

impl OdeSystem<f64, Complex64> for BlockLindblad {
    fn rhs(&mut self, _t: f64, y: &[Complex64], dy: &mut [Complex64]) {
        self.evaluate(y, dy);
    }
}
