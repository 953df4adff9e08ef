// SPDX-License-Identifier: Apache-2.0

//! Nuclear master equation after adiabatic elimination of the pumped electron:
//!
//! `d rho/dt = c_r D[A^-] rho - i c_i [A^+A^-, rho] - i g m_S [A^z, rho]`
//!
//! on the `2^N` nuclear register (bit `i` = nucleus `i`).

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::conventions::z_value;
use crate::error::{Error, Result};
use crate::model::{regime, CouplingProfile, SystemParams};
use crate::propagate::{propagate, RunOptions, RunOutput};
use crate::sector::{Basis, BasisTag, BlockLindblad, DensityMatrix, Drive, LindbladSpec};

pub const REDUCED_N_MAX: usize = 12;

fn up(s: usize, i: usize) -> bool {
    s & (1 << i) != 0
}

fn build(
    profile: &CouplingProfile,
    c_r: f64,
    c_i: f64,
    m_s: f64,
    omega_record: f64,
    grouped: bool,
) -> Result<BlockLindblad> {
    let n = profile.n();
    if n > REDUCED_N_MAX {
        return Err(Error::Capacity { solver: "reduced", n, limit: REDUCED_N_MAX });
    }
    profile.require_isotropic()?;
    if !(c_r >= 0.0) || !c_r.is_finite() || !c_i.is_finite() || !m_s.is_finite() {
        return Err(Error::param("c_r, c_i and m_S must be finite with c_r >= 0"));
    }
    let dim = 1usize << n;
    let gi = profile.couplings();
    let g = profile.g();
    let a_z: Vec<f64> = (0..dim).map(|s| (0..n).map(|i| gi[i] * z_value(up(s, i))).sum()).collect();
    let apam: Vec<(usize, usize, Complex64)> = crate::exact::a_plus_minus_operator(profile, dim, 0)
        .row_triplets()
        .collect();
    let mut ham: Vec<(usize, usize, Complex64)> = apam.iter().map(|&(r, c, v)| (r, c, v * c_i)).collect();
    for (s, az) in a_z.iter().enumerate() {
        ham.push((s, s, Complex64::new(g * m_s * az, 0.0)));
    }
    let mut jump = Vec::new();
    for s in 0..dim {
        for i in 0..n {
            if up(s, i) {
                jump.push((s & !(1 << i), s, Complex64::new(gi[i], 0.0)));
            }
        }
    }
    let basis = if grouped {
        Basis::grouped(dim, BasisTag::Nuclear, |s| s.count_ones() as i64)
    } else {
        Basis::single(dim, BasisTag::Nuclear)
    };
    BlockLindblad::new(LindbladSpec {
        basis,
        hamiltonian: ham,
        zeeman: vec![0.0; dim],
        drive: Drive::Fixed(omega_record),
        jump,
        jump_norm: apam.clone(),
        rate: c_r,
        a_z,
        a_plus_minus: apam,
        excitation: (0..dim).map(|s| s.count_ones() as f64).collect(),
        conserves_excitation: true,
    })
}

/// Right-hand side on an arbitrary dense nuclear matrix.
pub fn reduced_rhs(rho_n: &DensityMatrix, profile: &CouplingProfile, c_r: f64, c_i: f64, m_s: f64) -> Result<DensityMatrix> {
    let dim = 1usize << profile.n();
    if profile.n() <= REDUCED_N_MAX && rho_n.dim != dim {
        return Err(Error::Dimension { expected: dim, got: rho_n.dim });
    }
    let mut sys = build(profile, c_r, c_i, m_s, 0.0, false)?;
    sys.assume_hermitian = false;
    let y = sys.pack(rho_n)?;
    let mut dy = vec![Complex64::new(0.0, 0.0); y.len()];
    sys.evaluate(&y, &mut dy);
    let mut out = sys.unpack(&dy);
    out.basis = rho_n.basis;
    Ok(out)
}

/// Generator with `c_r`, `c_i` taken from the regime of `params` and the
/// Knight term from `params.m_s`.
pub fn reduced_generator(profile: &CouplingProfile, params: &SystemParams) -> Result<BlockLindblad> {
    params.validate()?;
    let r = regime(profile, params);
    build(profile, r.c_r, r.c_i, params.m_s, params.detuning.effective(), true)
}

pub fn evolve_reduced(
    rho0: &DensityMatrix,
    profile: &CouplingProfile,
    params: &SystemParams,
    grid: &[f64],
    options: &RunOptions,
) -> Result<RunOutput> {
    let mut sys = reduced_generator(profile, params)?;
    propagate(&mut sys, rho0, grid, options)
}

/// `||reduced_rhs(rho)||_1` (entrywise).
pub fn stationarity_residual(rho: &DensityMatrix, profile: &CouplingProfile, params: &SystemParams) -> Result<f64> {
    let r = regime(profile, params);
    Ok(reduced_rhs(rho, profile, r.c_r, r.c_i, params.m_s)?.l1_norm())
}

pub fn is_stationary(rho: &DensityMatrix, profile: &CouplingProfile, params: &SystemParams, tol: f64) -> Result<bool> {
    Ok(stationarity_residual(rho, profile, params)? < tol)
}

/// One JSON-lines record of a steady-state check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateReport {
    pub label: String,
    pub residual: f64,
    pub a_z: f64,
}

impl SteadyStateReport {
    pub fn evaluate(label: &str, rho: &DensityMatrix, profile: &CouplingProfile, params: &SystemParams) -> Result<Self> {
        let residual = stationarity_residual(rho, profile, params)?;
        let gi = profile.couplings();
        let a_z = (0..rho.dim)
            .map(|s| rho.get(s, s).re * (0..profile.n()).map(|i| gi[i] * z_value(up(s, i))).sum::<f64>())
            .sum();
        Ok(Self { label: label.to_string(), residual, a_z })
    }
}

pub fn write_reports(out: &mut impl Write, reports: &[SteadyStateReport]) -> std::io::Result<()> {
    for r in reports {
        serde_json::to_writer(&mut *out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
