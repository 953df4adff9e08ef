// SPDX-License-Identifier: Apache-2.0

//! Minimal complex CSR matrices acting on dense row-major blocks.

use num_complex::Complex64;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Csr {
    pub rows: usize,
    pub cols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<Complex64>,
}

impl Csr {
    /// Assembles from triplets; duplicate entries are summed and exact zeros dropped.
    pub fn from_triplets(rows: usize, cols: usize, mut trip: Vec<(usize, usize, Complex64)>) -> Self {
        trip.sort_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; rows + 1];
        let mut indices = Vec::with_capacity(trip.len());
        let mut values: Vec<Complex64> = Vec::with_capacity(trip.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in trip {
            assert!(r < rows && c < cols, "triplet ({r}, {c}) outside {rows}x{cols}");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..rows {
            indptr[r + 1] += indptr[r];
        }
        let mut m = Self { rows, cols, indptr, indices, values };
        m.prune();
        m
    }

    fn prune(&mut self) {
        let mut indptr = vec![0usize; self.rows + 1];
        let mut indices = Vec::with_capacity(self.indices.len());
        let mut values = Vec::with_capacity(self.values.len());
        for r in 0..self.rows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                if self.values[k] != Complex64::new(0.0, 0.0) {
                    indices.push(self.indices[k]);
                    values.push(self.values[k]);
                }
            }
            indptr[r + 1] = indices.len();
        }
        self.indptr = indptr;
        self.indices = indices;
        self.values = values;
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    #[inline]
    /// All stored entries as `(row, col, value)`.
    pub fn row_triplets(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.rows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        (self.indptr[r]..self.indptr[r + 1]).map(move |k| (self.indices[k], self.values[k]))
    }

    pub fn to_dense(&self) -> Vec<Complex64> {
        let mut d = vec![Complex64::new(0.0, 0.0); self.rows * self.cols];
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                d[r * self.cols + c] += v;
            }
        }
        d
    }

    pub fn adjoint(&self) -> Self {
        let mut trip = Vec::with_capacity(self.nnz());
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                trip.push((c, r, v.conj()));
            }
        }
        Self::from_triplets(self.cols, self.rows, trip)
    }

    /// `out += alpha * self * b` with `b` a dense row-major `cols x m` block.
    pub fn mul_dense_acc(&self, b: &[Complex64], m: usize, alpha: Complex64, out: &mut [Complex64]) {
        debug_assert_eq!(b.len(), self.cols * m);
        debug_assert_eq!(out.len(), self.rows * m);
        for r in 0..self.rows {
            let orow = &mut out[r * m..(r + 1) * m];
            for (c, v) in self.row(r) {
                let coef = alpha * v;
                let brow = &b[c * m..(c + 1) * m];
                for (o, x) in orow.iter_mut().zip(brow) {
                    *o += coef * x;
                }
            }
        }
    }

    /// Dense row-major product `a * self^dagger` accumulated into `out` (`a` is `k x cols`).
    pub fn dense_mul_adjoint_acc(&self, a: &[Complex64], k: usize, alpha: Complex64, out: &mut [Complex64]) {
        debug_assert_eq!(a.len(), k * self.cols);
        debug_assert_eq!(out.len(), k * self.rows);
        for i in 0..k {
            let arow = &a[i * self.cols..(i + 1) * self.cols];
            let orow = &mut out[i * self.rows..(i + 1) * self.rows];
            for (r, o) in orow.iter_mut().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for (c, v) in self.row(r) {
                    acc += arow[c] * v.conj();
                }
                *o += alpha * acc;
            }
        }
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.rows];
        self.mul_dense_acc(x, 1, Complex64::new(1.0, 0.0), &mut y);
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn triplets_merge_and_prune() {
        let m = Csr::from_triplets(2, 2, vec![(0, 1, c(1.0, 0.0)), (0, 1, c(1.0, 1.0)), (1, 0, c(0.0, 0.0))]);
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.to_dense()[1], c(2.0, 1.0));
    }

    #[test]
    fn products_match_dense() {
        let m = Csr::from_triplets(2, 3, vec![(0, 0, c(1.0, 2.0)), (1, 2, c(-1.0, 0.5)), (0, 2, c(0.0, 1.0))]);
        let b: Vec<Complex64> = (0..6).map(|k| c(k as f64, 1.0 - k as f64)).collect();
        let mut out = vec![c(0.0, 0.0); 4];
        m.mul_dense_acc(&b, 2, c(1.0, 0.0), &mut out);
        let d = m.to_dense();
        for r in 0..2 {
            for j in 0..2 {
                let e: Complex64 = (0..3).map(|k| d[r * 3 + k] * b[k * 2 + j]).sum();
                assert!((out[r * 2 + j] - e).norm() < 1e-14);
            }
        }
        let a: Vec<Complex64> = (0..3).map(|k| c(1.0 + k as f64, 0.5)).collect();
        let mut out = vec![c(0.0, 0.0); 2];
        m.dense_mul_adjoint_acc(&a, 1, c(1.0, 0.0), &mut out);
        for r in 0..2 {
            let e: Complex64 = (0..3).map(|k| a[k] * d[r * 3 + k].conj()).sum();
            assert!((out[r] - e).norm() < 1e-14);
        }
        assert_eq!(m.adjoint().adjoint(), m);
    }
}
