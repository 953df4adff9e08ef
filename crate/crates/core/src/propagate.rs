// SPDX-License-Identifier: Apache-2.0

//! Shared time stepping for the density-matrix solvers, with invariant checks
//! evaluated at every output sample.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{validate_grid, Dopri5, Observer, Tolerances};
use crate::sector::{BlockLindblad, DensityMatrix};
use crate::series::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub tolerances: Tolerances<f64>,
    /// Check the smallest eigenvalue every this many samples (0 disables).
    pub positivity_every: usize,
    /// Abort when the bookkeeping residual relative to the running peak intensity exceeds this.
    pub bookkeeping_abort: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { tolerances: Tolerances::default(), positivity_every: 0, bookkeeping_abort: 1e-6 }
    }
}

/// Invariant diagnostics collected over a run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct InvariantReport {
    pub max_trace_error: f64,
    pub max_hermiticity_error: f64,
    /// `max_t |d<excitation>/dt + I(t)|`; `None` when the Hamiltonian does not conserve excitation.
    pub max_bookkeeping_residual: Option<f64>,
    pub peak_intensity: f64,
    pub min_eigenvalue: Option<f64>,
}

impl InvariantReport {
    /// Bookkeeping residual relative to the peak intensity.
    pub fn relative_bookkeeping(&self) -> Option<f64> {
        self.max_bookkeeping_residual.map(|r| if self.peak_intensity > 0.0 { r / self.peak_intensity } else { r })
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub series: TimeSeries,
    pub invariants: InvariantReport,
    pub final_state: DensityMatrix,
    pub steps: usize,
}

/// Intensity scale below which the bookkeeping check becomes absolute.
pub const BOOKKEEPING_FLOOR: f64 = 1e-8;

struct Sampler {
    series: TimeSeries,
    report: InvariantReport,
    dy: Vec<Complex64>,
    positivity_every: usize,
    abort: f64,
}

impl Observer<f64, Complex64, BlockLindblad> for Sampler {
    fn sample(&mut self, index: usize, t: f64, y: &[Complex64], sys: &mut BlockLindblad) -> Result<(), String> {
        let obs = sys.observe(y);
        self.series.push([t, obs.intensity, obs.a_z, obs.a_plus_minus, obs.excitation, obs.omega_s]);
        let r = &mut self.report;
        r.max_trace_error = r.max_trace_error.max((obs.trace - 1.0).abs());
        r.max_hermiticity_error = r.max_hermiticity_error.max(sys.hermiticity_error(y));
        r.peak_intensity = r.peak_intensity.max(obs.intensity);
        if sys.conserves_excitation {
            sys.evaluate(y, &mut self.dy);
            let residual = (sys.excitation_rate(&self.dy) + obs.intensity).abs();
            let worst = r.max_bookkeeping_residual.unwrap_or(0.0).max(residual);
            r.max_bookkeeping_residual = Some(worst);
            if residual > self.abort * r.peak_intensity.max(BOOKKEEPING_FLOOR) {
                return Err(format!("photon bookkeeping residual {residual:e} at t = {t}"));
            }
        }
        if self.positivity_every > 0 && index % self.positivity_every == 0 {
            let m = sys.min_eigenvalue(y);
            r.min_eigenvalue = Some(r.min_eigenvalue.map_or(m, |v: f64| v.min(m)));
        }
        Ok(())
    }
}

pub fn propagate(sys: &mut BlockLindblad, rho0: &DensityMatrix, grid: &[f64], options: &RunOptions) -> Result<RunOutput> {
    validate_grid(grid)?;
    let mut y = sys.pack(rho0)?;
    let mut sampler = Sampler {
        series: TimeSeries::with_capacity(grid.len()),
        report: InvariantReport::default(),
        dy: vec![Complex64::new(0.0, 0.0); y.len()],
        positivity_every: options.positivity_every,
        abort: options.bookkeeping_abort,
    };
    let mut stepper = Dopri5::new(options.tolerances);
    let stats = stepper.integrate(sys, &mut y, grid, &mut sampler).map_err(|e| match e {
        crate::error::IntegrationError::Aborted { last_good_time, reason } => Error::Invariant {
            time: last_good_time,
            what: reason,
            value: f64::NAN,
            tolerance: options.bookkeeping_abort,
        },
        other => Error::Integration(other),
    })?;
    Ok(RunOutput {
        series: sampler.series,
        invariants: sampler.report,
        final_state: sys.unpack(&y),
        steps: stats.accepted,
    })
}
