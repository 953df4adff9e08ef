// SPDX-License-Identifier: Apache-2.0

//! Physical parameters, hyperfine coupling profiles and derived regime quantities.
//!
//! Everything here is expressed in natural units where the collective
//! hyperfine scale `A = g * sum_i g_i` equals one unless a profile is built
//! from physical couplings (NV environments), in which case
//! [`CouplingProfile::to_natural_units`] rescales it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Overall hyperfine strength `g` plus normalized per-nucleus couplings `g_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingProfile<T: Real = f64> {
    g: T,
    couplings: Vec<T>,
    anisotropic: Option<Vec<[[T; 3]; 3]>>,
    labels: Option<Vec<[T; 3]>>,
}

fn norm_tolerance<T: Real>(n: usize) -> T {
    T::lit(1e-12).max(T::epsilon() * T::from_usize(16 * n.max(1)).unwrap())
}

impl<T: Real> CouplingProfile<T> {
    /// Builds a profile from already-normalized couplings.
    pub fn new(g: T, couplings: Vec<T>) -> Result<Self> {
        if couplings.is_empty() {
            return Err(Error::param("coupling profile needs at least one nucleus"));
        }
        if !(g > T::zero()) || !g.is_finite() {
            return Err(Error::param(format!("hyperfine strength g must be positive, got {g}")));
        }
        if let Some(bad) = couplings.iter().find(|c| !(**c >= T::zero()) || !c.is_finite()) {
            return Err(Error::param(format!("couplings must be non-negative, got {bad}")));
        }
        let sum_sq: T = couplings.iter().map(|c| *c * *c).sum();
        if (sum_sq - T::one()).abs() > norm_tolerance::<T>(couplings.len()) {
            return Err(Error::param(format!("couplings must satisfy sum g_i^2 = 1, got {sum_sq}")));
        }
        Ok(Self { g, couplings, anisotropic: None, labels: None })
    }

    /// Builds a profile from physical couplings `h_i = g * g_i`.
    pub fn from_physical(physical: &[T]) -> Result<Self> {
        if physical.is_empty() {
            return Err(Error::NoActiveNuclei);
        }
        let norm = physical.iter().map(|h| *h * *h).sum::<T>().sqrt();
        if !(norm > T::zero()) {
            return Err(Error::param("all physical couplings are zero"));
        }
        let couplings = physical.iter().map(|h| h.abs() / norm).collect();
        Self::new(norm, couplings)
    }

    pub fn with_labels(mut self, labels: Vec<[T; 3]>) -> Result<Self> {
        if labels.len() != self.couplings.len() {
            return Err(Error::Dimension { expected: self.couplings.len(), got: labels.len() });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Attaches per-nucleus 3x3 correction tensors (angular frequency, same units as `g`).
    pub fn with_anisotropic(mut self, tensors: Vec<[[T; 3]; 3]>) -> Result<Self> {
        if tensors.len() != self.couplings.len() {
            return Err(Error::Dimension { expected: self.couplings.len(), got: tensors.len() });
        }
        self.anisotropic = Some(tensors);
        Ok(self)
    }

    pub fn g(&self) -> T {
        self.g
    }

    pub fn couplings(&self) -> &[T] {
        &self.couplings
    }

    pub fn anisotropic(&self) -> Option<&[[[T; 3]; 3]]> {
        self.anisotropic.as_deref()
    }

    pub fn labels(&self) -> Option<&[[T; 3]]> {
        self.labels.as_deref()
    }

    pub fn n(&self) -> usize {
        self.couplings.len()
    }

    /// Collective coupling scale `A = g * sum_i g_i`.
    pub fn a_scale(&self) -> T {
        self.g * self.couplings.iter().copied().sum::<T>()
    }

    /// Physical couplings `g * g_i`.
    pub fn physical(&self) -> Vec<T> {
        self.couplings.iter().map(|c| *c * self.g).collect()
    }

    pub fn is_homogeneous(&self) -> bool {
        let first = self.couplings[0];
        self.couplings.iter().all(|c| (*c - first).abs() <= T::lit(1e-12).max(T::epsilon() * T::lit(8.0)))
    }

    pub fn require_isotropic(&self) -> Result<()> {
        if self.anisotropic.is_some() {
            Err(Error::Anisotropic)
        } else {
            Ok(())
        }
    }

    /// Rescales `g` (and any anisotropic tensors) so that `A = 1`; returns the
    /// profile together with the physical value of `A` used as the frequency unit.
    pub fn to_natural_units(&self) -> (Self, T) {
        let a = self.a_scale();
        let mut out = self.clone();
        out.g = self.g / a;
        if let Some(t) = out.anisotropic.as_mut() {
            for m in t.iter_mut() {
                for row in m.iter_mut() {
                    for v in row.iter_mut() {
                        *v = *v / a;
                    }
                }
            }
        }
        (out, a)
    }

    /// Same couplings with `g` chosen so that `A = a`.
    pub fn with_a_scale(&self, a: T) -> Self {
        let mut out = self.clone();
        out.g = a / self.couplings.iter().copied().sum::<T>();
        out
    }
}

/// `L x L` square lattice centred on the electron with Gaussian envelope
/// `g_i ~ |psi(r_i)|^2 = exp(-2 r_i^2 / w^2)` (edge near `e^-8` at `w = L/4`), scaled so that `A = 1`.
pub fn gaussian_couplings<T: Real>(lattice_side: usize, width: T) -> Result<CouplingProfile<T>> {
    if lattice_side == 0 {
        return Err(Error::param("lattice side must be at least 1"));
    }
    if !(width > T::zero()) {
        return Err(Error::param(format!("Gaussian width must be positive, got {width}")));
    }
    let centre = T::from_usize(lattice_side - 1).unwrap() / T::lit(2.0);
    let mut raw = Vec::with_capacity(lattice_side * lattice_side);
    let mut labels = Vec::with_capacity(lattice_side * lattice_side);
    let half_w2 = width * width / T::lit(2.0);
    for iy in 0..lattice_side {
        for ix in 0..lattice_side {
            let x = T::from_usize(ix).unwrap() - centre;
            let y = T::from_usize(iy).unwrap() - centre;
            raw.push((-(x * x + y * y) / half_w2).exp());
            labels.push([x, y, T::zero()]);
        }
    }
    let norm = raw.iter().map(|v| *v * *v).sum::<T>().sqrt();
    let couplings: Vec<T> = raw.into_iter().map(|v| v / norm).collect();
    let sum: T = couplings.iter().copied().sum();
    CouplingProfile::new(T::one() / sum, couplings)?.with_labels(labels)
}

/// Default Gaussian width `L / 4`.
pub fn default_width<T: Real>(lattice_side: usize) -> T {
    T::from_usize(lattice_side).unwrap() / T::lit(4.0)
}

/// `n` equally coupled nuclei, `g_i = 1/sqrt(n)`, `A = 1`.
pub fn homogeneous_couplings<T: Real>(n: usize) -> Result<CouplingProfile<T>> {
    if n == 0 {
        return Err(Error::param("homogeneous profile needs n >= 1"));
    }
    let nf = T::from_usize(n).unwrap();
    let c = T::one() / nf.sqrt();
    CouplingProfile::new(T::one() / (nf * c), vec![c; n])
}

/// Normalized couplings drawn uniformly from `[lo, 1]` before normalization; `A = 1`.
pub fn random_couplings<T: Real>(n: usize, lo: f64, seed: u64) -> Result<CouplingProfile<T>> {
    if n == 0 {
        return Err(Error::param("random profile needs n >= 1"));
    }
    if !(0.0..1.0).contains(&lo) {
        return Err(Error::param("lower bound must lie in [0, 1)"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<T> = (0..n).map(|_| T::lit(rng.gen_range(lo..=1.0))).collect();
    Ok(CouplingProfile::from_physical(&raw)?.with_a_scale(T::one()))
}

/// One shell of candidate lattice sites around an NV centre.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShellRecord {
    pub radius_angstrom: f64,
    pub coupling_mhz: f64,
    pub multiplicity: usize,
    pub first_shell: bool,
}

/// Parses a whitespace- or comma-separated shell table:
/// `radius_angstrom coupling_mhz multiplicity first_shell`, `#` starts a comment.
pub fn parse_coupling_table(text: &str) -> Result<Vec<ShellRecord>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|f| !f.is_empty()).collect();
        let bad = |what: &str| Error::Config(format!("coupling table line {}: {what}: {raw:?}", lineno + 1));
        if fields.len() != 4 {
            return Err(bad("expected 4 fields"));
        }
        let radius_angstrom = fields[0].parse().map_err(|_| bad("bad radius"))?;
        let coupling_mhz = fields[1].parse().map_err(|_| bad("bad coupling"))?;
        let multiplicity = fields[2].parse().map_err(|_| bad("bad multiplicity"))?;
        let first_shell = match fields[3].to_ascii_lowercase().as_str() {
            "1" | "true" | "yes" => true,
            "0" | "false" | "no" => false,
            _ => return Err(bad("bad first_shell flag")),
        };
        out.push(ShellRecord { radius_angstrom, coupling_mhz, multiplicity, first_shell });
    }
    Ok(out)
}

pub fn format_coupling_table(table: &[ShellRecord]) -> String {
    let mut s = String::from("# radius_angstrom coupling_mhz multiplicity first_shell\n");
    for r in table {
        s.push_str(&format!("{} {} {} {}\n", r.radius_angstrom, r.coupling_mhz, r.multiplicity, r.first_shell));
    }
    s
}

/// Default cutoff for NV environments: `2 pi * 0.5 MHz`, in rad/us.
pub const NV_DEFAULT_CUTOFF: f64 = std::f64::consts::TAU * 0.5;

/// Samples a random 13C environment. Couplings are converted to angular
/// frequency in rad/us (`2 pi * MHz`); the returned profile keeps those
/// physical couplings, so `g` is in rad/us.
pub fn nv_sample_environment<T: Real>(
    concentration: f64,
    table: &[ShellRecord],
    cutoff: f64,
    seed: u64,
) -> Result<CouplingProfile<T>> {
    if !(0.0..=1.0).contains(&concentration) {
        return Err(Error::param(format!("concentration must lie in [0, 1], got {concentration}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut physical = Vec::new();
    let mut labels = Vec::new();
    for shell in table {
        for site in 0..shell.multiplicity {
            // One draw per site keeps the random stream independent of the cutoff.
            let occupied = rng.gen::<f64>() < concentration;
            let h = std::f64::consts::TAU * shell.coupling_mhz.abs();
            if occupied && !shell.first_shell && h >= cutoff && h > 0.0 {
                physical.push(T::lit(h));
                labels.push([T::lit(shell.radius_angstrom), T::from_usize(site).unwrap(), T::zero()]);
            }
        }
    }
    if physical.is_empty() {
        return Err(Error::NoActiveNuclei);
    }
    CouplingProfile::from_physical(&physical)?.with_labels(labels)
}

/// Environment with exactly `n` active nuclei: a uniform random subset of the
/// eligible sites, which is the concentration sampling conditioned on its count.
pub fn nv_fixed_size_environment<T: Real>(n: usize, table: &[ShellRecord], cutoff: f64, seed: u64) -> Result<CouplingProfile<T>> {
    let mut sites = Vec::new();
    for shell in table {
        let h = std::f64::consts::TAU * shell.coupling_mhz.abs();
        if !shell.first_shell && h >= cutoff && h > 0.0 {
            for site in 0..shell.multiplicity {
                sites.push((h, shell.radius_angstrom, site));
            }
        }
    }
    if n == 0 {
        return Err(Error::NoActiveNuclei);
    }
    if n > sites.len() {
        return Err(Error::param(format!("table has only {} eligible sites above the cutoff, {n} requested", sites.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked = rand::seq::index::sample(&mut rng, sites.len(), n).into_vec();
    let mut picked: Vec<_> = picked.into_iter().map(|k| sites[k]).collect();
    picked.sort_by(|a, b| b.0.total_cmp(&a.0));
    let physical: Vec<T> = picked.iter().map(|p| T::lit(p.0)).collect();
    let labels = picked.iter().map(|p| [T::lit(p.1), T::from_usize(p.2).unwrap(), T::zero()]).collect();
    CouplingProfile::from_physical(&physical)?.with_labels(labels)
}

/// Synthetic shell table used by tests and examples. The values follow a
/// smooth radial falloff and are NOT ab-initio hyperfine constants.
pub fn synthetic_nv_table(shells: usize) -> Vec<ShellRecord> {
    (0..shells)
        .map(|k| {
            let r = 1.5 + 0.15 * k as f64;
            ShellRecord {
                radius_angstrom: r,
                coupling_mhz: 130.0 * (-(r - 1.5) / 0.9).exp(),
                multiplicity: 3,
                first_shell: k == 0,
            }
        })
        .collect()
}

/// How the electron Zeeman term is set during a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "omega", rename_all = "snake_case")]
pub enum DetuningPolicy<T: Real = f64> {
    /// Constant `omega_S`.
    Fixed(T),
    /// `omega_S(t)` tracks the Overhauser field so that `omega_S + g <A^z> = target`.
    Compensated(T),
}

impl<T: Real> DetuningPolicy<T> {
    /// Effective electron splitting seen by the regime formulas.
    pub fn effective(&self) -> T {
        match *self {
            Self::Fixed(w) | Self::Compensated(w) => w,
        }
    }

    pub fn is_compensated(&self) -> bool {
        matches!(self, Self::Compensated(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitialStateKind {
    /// Uncorrelated product state with every nucleus at the same polarization.
    #[default]
    Product,
    /// Permutation-averaged mixture of highest-weight Dicke states `|J, J>`.
    DickeMixture,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams<T: Real = f64> {
    pub gamma_r: T,
    pub detuning: DetuningPolicy<T>,
    pub m_s: T,
    pub initial_polarization: T,
    pub initial_state: InitialStateKind,
}

impl<T: Real> SystemParams<T> {
    pub fn new(gamma_r: T, detuning: DetuningPolicy<T>) -> Result<Self> {
        let p = Self {
            gamma_r,
            detuning,
            m_s: T::zero(),
            initial_polarization: T::one(),
            initial_state: InitialStateKind::Product,
        };
        p.validate()?;
        Ok(p)
    }

    /// `omega_S = A/2` (compensated or fixed) with `Gamma_r` chosen for the requested `epsilon`.
    pub fn for_epsilon(eps: T, a: T, compensated: bool) -> Result<Self> {
        let gamma = gamma_for_epsilon(eps, a)?;
        let half = a / T::lit(2.0);
        let det = if compensated { DetuningPolicy::Compensated(half) } else { DetuningPolicy::Fixed(half) };
        Self::new(gamma, det)
    }

    pub fn with_polarization(mut self, p: T) -> Result<Self> {
        self.initial_polarization = p;
        self.validate()?;
        Ok(self)
    }

    pub fn with_initial_state(mut self, kind: InitialStateKind) -> Self {
        self.initial_state = kind;
        self
    }

    pub fn with_m_s(mut self, m_s: T) -> Self {
        self.m_s = m_s;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_r > T::zero()) || !self.gamma_r.is_finite() {
            return Err(Error::param(format!("Gamma_r must be positive, got {}", self.gamma_r)));
        }
        let p = self.initial_polarization;
        if !(p >= -T::one() && p <= T::one()) {
            return Err(Error::param(format!("polarization must lie in [-1, 1], got {p}")));
        }
        if !self.detuning.effective().is_finite() {
            return Err(Error::param("detuning must be finite"));
        }
        Ok(())
    }

    /// `Delta = |Gamma_r/2 + i omega_S|` at a given splitting.
    pub fn delta_at(&self, omega_s: T) -> T {
        (self.gamma_r / T::lit(2.0)).hypot(omega_s)
    }
}

/// Derived scalars controlling the dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeSummary<T: Real = f64> {
    pub a: T,
    pub delta: T,
    pub epsilon: T,
    pub c_r: T,
    pub c_i: T,
}

pub fn regime<T: Real>(profile: &CouplingProfile<T>, params: &SystemParams<T>) -> RegimeSummary<T> {
    let a = profile.a_scale();
    let omega = params.detuning.effective();
    let delta = params.delta_at(omega);
    let two_delta = T::lit(2.0) * delta;
    let pref = profile.g() * profile.g() / (two_delta * two_delta);
    RegimeSummary { a, delta, epsilon: a / two_delta, c_r: pref * params.gamma_r, c_i: pref * omega }
}

/// Pump rate giving relative coupling `eps` at `omega_S = A/2`.
pub fn gamma_for_epsilon<T: Real>(eps: T, a: T) -> Result<T> {
    if !(eps > T::zero() && eps <= T::one()) {
        return Err(Error::param(format!("epsilon must lie in (0, 1], got {eps}")));
    }
    if !(a > T::zero()) {
        return Err(Error::param(format!("A must be positive, got {a}")));
    }
    let gamma = a * (T::one() - eps * eps).sqrt() / eps;
    if gamma <= T::zero() {
        return Err(Error::ZeroPumpRate);
    }
    Ok(gamma)
}
