// SPDX-License-Identifier: Apache-2.0

//! Sampled observables and the relative-intensity figure of merit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Observables sampled on the output grid. Times are in units of `1/A`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TimeSeries<T: Real = f64> {
    pub t: Vec<T>,
    /// Photon rate `I(t)`.
    pub intensity: Vec<T>,
    pub a_z: Vec<T>,
    pub a_plus_minus: Vec<T>,
    /// Total excitation `<S^+S^- + sum_i sigma_i^+ sigma_i^->` (nuclear only for reduced runs).
    pub excitation: Vec<T>,
    /// Applied electron splitting `omega_S(t)`.
    pub omega_s: Vec<T>,
}

pub const CSV_HEADER: &str = "t,intensity,a_z,a_plus_minus,excitation,omega_s";

impl<T: Real> TimeSeries<T> {
    pub fn with_capacity(n: usize) -> Self {
        Self {
            t: Vec::with_capacity(n),
            intensity: Vec::with_capacity(n),
            a_z: Vec::with_capacity(n),
            a_plus_minus: Vec::with_capacity(n),
            excitation: Vec::with_capacity(n),
            omega_s: Vec::with_capacity(n),
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn push(&mut self, row: [T; 6]) {
        self.t.push(row[0]);
        self.intensity.push(row[1]);
        self.a_z.push(row[2]);
        self.a_plus_minus.push(row[3]);
        self.excitation.push(row[4]);
        self.omega_s.push(row[5]);
    }

    pub fn row(&self, i: usize) -> [T; 6] {
        [self.t[i], self.intensity[i], self.a_z[i], self.a_plus_minus[i], self.excitation[i], self.omega_s[i]]
    }

    /// Largest intensity and the time it occurs.
    pub fn peak(&self) -> Option<(T, T)> {
        let mut best: Option<(T, T)> = None;
        for (t, i) in self.t.iter().zip(&self.intensity) {
            if best.map_or(true, |(_, b)| *i > b) {
                best = Some((*t, *i));
            }
        }
        best
    }

    /// Intensity at the first local maximum (or the last sample if monotone increasing).
    pub fn first_local_max(&self) -> Option<(T, T)> {
        let n = self.len();
        if n == 0 {
            return None;
        }
        for k in 1..n {
            if self.intensity[k] < self.intensity[k - 1] {
                return Some((self.t[k - 1], self.intensity[k - 1]));
            }
        }
        Some((self.t[n - 1], self.intensity[n - 1]))
    }

    /// Intensity at the first sample with `t >= t0`.
    pub fn intensity_at(&self, t0: T) -> Option<T> {
        self.t.iter().position(|t| *t >= t0).map(|k| self.intensity[k])
    }

    /// Sup-norm distance between the intensity columns of two series on the same grid.
    pub fn intensity_sup_distance(&self, other: &Self) -> Result<T> {
        if self.len() != other.len() {
            return Err(Error::Dimension { expected: self.len(), got: other.len() });
        }
        Ok(self
            .intensity
            .iter()
            .zip(&other.intensity)
            .map(|(a, b)| (*a - *b).abs())
            .fold(T::zero(), T::max))
    }
}

/// Denominator of the relative peak height `I_coop / I_ind`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reference<T: Real = f64> {
    /// `I` at the first sample; the ladder-type convention where `I(0) > 0`.
    Initial,
    /// Early-time plateau `I(t0)`, default `t0 = 5 / Gamma_r`.
    Plateau(T),
    /// Externally computed independent-emitter intensity.
    Value(T),
}

/// `max_t I(t) / I_ref`.
pub fn relative_peak<T: Real>(ts: &TimeSeries<T>, reference: Reference<T>) -> Result<T> {
    let (_, peak) = ts.peak().ok_or(Error::UndefinedRatio)?;
    let denom = match reference {
        Reference::Initial => ts.intensity[0],
        Reference::Plateau(t0) => ts.intensity_at(t0).ok_or(Error::UndefinedRatio)?,
        Reference::Value(v) => v,
    };
    if !(denom > T::zero()) {
        return Err(Error::UndefinedRatio);
    }
    Ok(peak / denom)
}

/// Both relative-peak conventions plus the raw peak, as reported by every run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakSummary {
    pub peak_intensity: f64,
    pub peak_time: f64,
    /// `I_ind`: first local maximum of the independent-emitter reference run.
    pub independent_reference: Option<f64>,
    /// `I_peak / I_ind`; the headline figure of merit.
    pub relative_peak: Option<f64>,
    /// Plateau convention `I_peak / I(5 / Gamma_r)`.
    pub relative_peak_plateau: Option<f64>,
}

impl PeakSummary {
    pub fn new<T: Real>(ts: &TimeSeries<T>, independent: Option<T>, plateau_time: Option<T>) -> Self {
        let (pt, pi) = ts.peak().unwrap_or((T::zero(), T::zero()));
        Self {
            peak_intensity: pi.to_f64_lossy(),
            peak_time: pt.to_f64_lossy(),
            independent_reference: independent.map(|v| v.to_f64_lossy()),
            relative_peak: independent.and_then(|v| relative_peak(ts, Reference::Value(v)).ok()).map(|v| v.to_f64_lossy()),
            relative_peak_plateau: plateau_time
                .and_then(|t0| relative_peak(ts, Reference::Plateau(t0)).ok())
                .map(|v| v.to_f64_lossy()),
        }
    }
}

/// Least-squares line `y = slope x + intercept` with coefficient of determination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::param("linear fit needs at least two paired points"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    if sxx == 0.0 {
        return Err(Error::param("linear fit needs distinct x values"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Ok(LinearFit { slope, intercept, r_squared })
}

/// Power-law exponent from a log-log fit, `y ~ x^p`.
pub fn power_law_exponent(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(Error::param("power-law fit needs positive data"));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly)
}
