// SPDX-License-Identifier: Apache-2.0

//! Executes a resolved [`RunConfig`] with the selected solver.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::collective::{collective_exact_evolve, dicke_ladder_evolve, DickeLadderState};
use crate::cumulant::{evolve_cumulant, independent_reference, init_cumulant, CumulantOptions};
use crate::error::{Error, Result};
use crate::exact::{evolve as exact_evolve, with_electron_down};
use crate::io::{RunConfig, Solver};
use crate::model::{regime, CouplingProfile, InitialStateKind, SystemParams};
use crate::ode::Tolerances;
use crate::propagate::{InvariantReport, RunOptions};
use crate::reduced::evolve_reduced;
use crate::sector::DensityMatrix;
use crate::series::{PeakSummary, TimeSeries};
use crate::states::{dicke_mixture, nuclear_product};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RunInvariants {
    pub max_trace_error: Option<f64>,
    pub max_hermiticity_error: Option<f64>,
    pub max_bookkeeping_residual: Option<f64>,
    /// Bookkeeping residual divided by the peak intensity.
    pub relative_bookkeeping: Option<f64>,
    pub peak_intensity: f64,
    pub steps: Option<usize>,
}

impl From<&InvariantReport> for RunInvariants {
    fn from(r: &InvariantReport) -> Self {
        Self {
            max_trace_error: Some(r.max_trace_error),
            max_hermiticity_error: Some(r.max_hermiticity_error),
            max_bookkeeping_residual: r.max_bookkeeping_residual,
            relative_bookkeeping: r.relative_bookkeeping(),
            peak_intensity: r.peak_intensity,
            steps: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub series: TimeSeries,
    pub summary: PeakSummary,
    pub invariants: RunInvariants,
    /// Final Dicke-ladder populations of ladder runs.
    pub ladder: Option<DickeLadderState>,
}

fn tolerances(c: &RunConfig) -> Tolerances<f64> {
    Tolerances::new(c.rtol, c.atol)
}

fn initial_nuclear(n: usize, params: &SystemParams) -> Result<DensityMatrix> {
    match params.initial_state {
        InitialStateKind::Product => nuclear_product(n, params.initial_polarization),
        InitialStateKind::DickeMixture => dicke_mixture(n, params.initial_polarization),
    }
}

/// First local maximum of the uncorrelated-emitter intensity for the same
/// couplings, pump and start polarization.
pub fn independent_intensity(profile: &CouplingProfile, params: &SystemParams, grid: &[f64], tol: Tolerances<f64>) -> Result<f64> {
    let start = init_cumulant(profile, params.initial_polarization, InitialStateKind::Product)?;
    let opts = CumulantOptions { tolerances: tol, ..CumulantOptions::default() };
    let run = independent_reference(&start, profile, params, grid, &opts)?;
    let (_, v) = run.series.first_local_max().ok_or(Error::UndefinedRatio)?;
    Ok(v)
}

/// Runs `config` (already resolved). Cumulant runs write periodic snapshots
/// into `snapshot_dir` when given.
pub fn execute(config: &RunConfig, snapshot_dir: Option<&Path>) -> Result<RunResult> {
    let profile = config.profile()?;
    let params = config.system_params()?;
    let grid = config.grid()?;
    let tol = tolerances(config);
    let options = RunOptions { tolerances: tol, positivity_every: 0, bookkeeping_abort: config.bookkeeping_abort };
    let plateau = Some(5.0 / params.gamma_r);
    let with_reference = |series: TimeSeries, invariants: RunInvariants| -> Result<RunResult> {
        let ind = independent_intensity(&profile, &params, &grid, tol)?;
        let summary = PeakSummary::new(&series, Some(ind), plateau);
        Ok(RunResult { series, summary, invariants, ladder: None })
    };
    match config.solver {
        Solver::Exact => {
            let rho0 = with_electron_down(&initial_nuclear(profile.n(), &params)?);
            let out = exact_evolve(&rho0, &profile, &params, &grid, &options)?;
            let mut inv = RunInvariants::from(&out.invariants);
            inv.steps = Some(out.steps);
            with_reference(out.series, inv)
        }
        Solver::Reduced => {
            let rho0 = initial_nuclear(profile.n(), &params)?;
            let out = evolve_reduced(&rho0, &profile, &params, &grid, &options)?;
            let mut inv = RunInvariants::from(&out.invariants);
            inv.steps = Some(out.steps);
            with_reference(out.series, inv)
        }
        Solver::Collective if config.ladder => {
            profile.require_isotropic()?;
            if !profile.is_homogeneous() {
                return Err(Error::NotHomogeneous);
            }
            // Ladder rates multiply J^+J^-, while c_r multiplies A^+A^- = J^+J^-/N.
            let c_r = regime(&profile, &params).c_r / profile.n() as f64;
            let run = dicke_ladder_evolve(profile.n(), c_r, &grid, tol)?;
            let i0 = run.series.intensity[0];
            let summary = PeakSummary::new(&run.series, Some(i0), None);
            let peak = summary.peak_intensity;
            let invariants = RunInvariants {
                max_bookkeeping_residual: Some(run.max_bookkeeping_residual),
                relative_bookkeeping: Some(run.max_bookkeeping_residual / peak.max(f64::MIN_POSITIVE)),
                peak_intensity: peak,
                ..RunInvariants::default()
            };
            Ok(RunResult { series: run.series, summary, invariants, ladder: Some(run.final_state) })
        }
        Solver::Collective => {
            let out = collective_exact_evolve(&profile, &params, &grid, &options)?;
            let mut inv = RunInvariants::from(&out.invariants);
            inv.steps = Some(out.steps);
            with_reference(out.series, inv)
        }
        Solver::Cumulant => {
            let start = init_cumulant(&profile, params.initial_polarization, params.initial_state)?;
            let opts = CumulantOptions {
                tolerances: tol,
                bookkeeping_abort: config.bookkeeping_abort,
                snapshots: snapshot_dir.map(|d| (config.samples.div_ceil(10).max(1), d.to_path_buf())),
                ..CumulantOptions::default()
            };
            let run = evolve_cumulant(&start, &profile, &params, &grid, &opts)?;
            let invariants = RunInvariants {
                max_bookkeeping_residual: Some(run.max_bookkeeping_residual),
                relative_bookkeeping: Some(run.max_bookkeeping_residual / run.peak_intensity.max(f64::MIN_POSITIVE)),
                peak_intensity: run.peak_intensity,
                steps: Some(run.steps),
                ..RunInvariants::default()
            };
            with_reference(run.series, invariants)
        }
    }
}
