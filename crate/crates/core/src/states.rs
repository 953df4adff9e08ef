// SPDX-License-Identifier: Apache-2.0

//! Brute-force nuclear density matrices on the `2^N` register (bit `i` = nucleus `i`).

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::sector::{BasisTag, DensityMatrix};

const MAX_BRUTE_FORCE: usize = 14;

fn guard(n: usize) -> Result<()> {
    if n == 0 || n > MAX_BRUTE_FORCE {
        Err(Error::Capacity { solver: "brute-force state", n, limit: MAX_BRUTE_FORCE })
    } else {
        Ok(())
    }
}

/// Every nucleus independently up with probability `(1 + P)/2`.
pub fn nuclear_product(n: usize, polarization: f64) -> Result<DensityMatrix> {
    guard(n)?;
    let dim = 1usize << n;
    let p_up = 0.5 * (1.0 + polarization);
    let mut rho = DensityMatrix::zeros(dim, BasisTag::Nuclear);
    for s in 0..dim {
        let k = s.count_ones() as i32;
        rho.set(s, s, Complex64::new(p_up.powi(k) * (1.0 - p_up).powi(n as i32 - k), 0.0));
    }
    Ok(rho)
}

pub fn all_down(n: usize) -> Result<DensityMatrix> {
    guard(n)?;
    Ok(DensityMatrix::basis_state(1 << n, 0, BasisTag::Nuclear))
}

pub fn all_up(n: usize) -> Result<DensityMatrix> {
    guard(n)?;
    Ok(DensityMatrix::basis_state(1 << n, (1 << n) - 1, BasisTag::Nuclear))
}

/// Two-spin singlet `(|up,down> - |down,up>)/sqrt 2`.
pub fn singlet() -> DensityMatrix {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let amps = [
        Complex64::new(0.0, 0.0),
        Complex64::new(h, 0.0),
        Complex64::new(-h, 0.0),
        Complex64::new(0.0, 0.0),
    ];
    DensityMatrix::pure(&amps, BasisTag::Nuclear)
}

/// Total spin `J` whose extremal states carry polarization `P`: `J = |P| N / 2`.
pub fn dicke_j(n: usize, polarization: f64) -> Result<f64> {
    let two_j = polarization.abs() * n as f64;
    let rounded = two_j.round();
    if (two_j - rounded).abs() > 1e-9 || (n as f64 - rounded) % 2.0 != 0.0 {
        return Err(Error::param(format!(
            "polarization {polarization} gives no admissible J for N = {n} (need N/2 - |P|N/2 integer)"
        )));
    }
    Ok(rounded / 2.0)
}

/// Uniform mixture over all extremal Dicke states `|J, +J>` (P >= 0) or `|J, -J>` (P < 0)
/// with `J = |P| N / 2`, built by diagonalizing `J^-J^+` (resp. `J^+J^-`) in the `M = +-J` sector.
pub fn dicke_mixture(n: usize, polarization: f64) -> Result<DensityMatrix> {
    guard(n)?;
    let j = dicke_j(n, polarization)?;
    let target_up = if polarization >= 0.0 {
        (n as f64 / 2.0 + j).round() as u32
    } else {
        (n as f64 / 2.0 - j).round() as u32
    };
    let dim = 1usize << n;
    let members: Vec<usize> = (0..dim).filter(|s| s.count_ones() == target_up).collect();
    let index = |s: usize| members.binary_search(&s).ok();
    let m = members.len();
    // Kernel of J^+ (highest weight) is the kernel of J^-J^+ restricted to the sector.
    let raise = polarization >= 0.0;
    let mut op = DMatrix::<f64>::zeros(m, m);
    for (col, &s) in members.iter().enumerate() {
        // Apply the ladder operator, then its adjoint, collecting amplitudes.
        let mut mid: Vec<(usize, f64)> = Vec::new();
        for i in 0..n {
            let bit = 1 << i;
            let flip = if raise { s & bit == 0 } else { s & bit != 0 };
            if flip {
                mid.push((s ^ bit, 1.0));
            }
        }
        for (t, amp) in mid {
            for i in 0..n {
                let bit = 1 << i;
                let back = if raise { t & bit != 0 } else { t & bit == 0 };
                if back {
                    if let Some(row) = index(t ^ bit) {
                        op[(row, col)] += amp;
                    }
                }
            }
        }
    }
    let eig = op.symmetric_eigen();
    let mut rho_sector = DMatrix::<f64>::zeros(m, m);
    let mut rank = 0usize;
    for k in 0..m {
        if eig.eigenvalues[k].abs() < 1e-8 {
            let v = eig.eigenvectors.column(k);
            rho_sector += &v * v.transpose();
            rank += 1;
        }
    }
    if rank == 0 {
        return Err(Error::param("empty extremal Dicke subspace"));
    }
    rho_sector /= rank as f64;
    let mut rho = DensityMatrix::zeros(dim, BasisTag::Nuclear);
    for (a, &sa) in members.iter().enumerate() {
        for (b, &sb) in members.iter().enumerate() {
            rho.set(sa, sb, Complex64::new(rho_sector[(a, b)], 0.0));
        }
    }
    Ok(rho)
}

/// `<sigma_i^+ sigma_j^->` from a nuclear density matrix.
pub fn covariance(rho: &DensityMatrix, n: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    for s in 0..rho.dim {
        for j in 0..n {
            if s & (1 << j) == 0 {
                continue;
            }
            let s1 = s & !(1 << j);
            for i in 0..n {
                if s1 & (1 << i) != 0 {
                    continue;
                }
                let t = s1 | (1 << i);
                // <sigma_i^+ sigma_j^-> = sum_s rho[s, t] <t|op|s>.
                out[i * n + j] += rho.get(s, t);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dicke_mixture_traces_and_values() {
        let rho = dicke_mixture(4, 0.5).unwrap();
        assert!((rho.trace().re - 1.0).abs() < 1e-12);
        // J = 1 has multiplicity 3 for four spins.
        assert!((rho.purity() - 1.0 / 3.0).abs() < 1e-10);
        let full = dicke_mixture(4, 1.0).unwrap();
        assert!((full.get(15, 15).re - 1.0).abs() < 1e-12);
        assert!(dicke_mixture(4, 0.3).is_err());
    }

    #[test]
    fn singlet_covariance() {
        let cov = covariance(&singlet(), 2);
        assert!((cov[0].re - 0.5).abs() < 1e-15);
        assert!((cov[1].re + 0.5).abs() < 1e-15);
    }
}
