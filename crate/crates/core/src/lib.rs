// SPDX-License-Identifier: Apache-2.0

//! Simulators for superradiant Raman emission from a polarized nuclear spin
//! ensemble coupled by the hyperfine interaction to a single optically
//! pumped electron spin.
//!
//! Solvers:
//! * [`exact`]: full master equation in the electron-nuclear product basis (small `N`).
//! * [`collective`]: homogeneous couplings in the symmetric Dicke basis, plus
//!   the ideal Dicke-ladder rate equations.
//! * [`reduced`]: nuclear master equation after eliminating the electron.
//! * [`cumulant`]: second-order moment closure for hundreds of spins.
//! * [`semiclassical`]: mean-field Bloch equations with a transverse drive.
//!
//! Generic numerics ([`model`], [`ode`], [`series`], the Dicke ladder and the
//! mean-field equations) are written over [`Real`]; the density-matrix and
//! moment solvers run in `f64`.

pub mod collective;
pub mod control;
pub mod conventions;
pub mod cumulant;
pub mod error;
pub mod exact;
pub mod io;
pub mod model;
pub mod ode;
pub mod plot;
pub mod propagate;
pub mod reduced;
pub mod run;
pub mod scalar;
pub mod sector;
pub mod semiclassical;
pub mod series;
pub mod sparse;
pub mod states;

pub use error::{Error, IntegrationError, Result};
pub use scalar::{OdeElem, Real};

pub type CouplingProfile = model::CouplingProfile<f64>;
pub type CouplingProfileF32 = model::CouplingProfile<f32>;
pub type SystemParams = model::SystemParams<f64>;
pub type SystemParamsF32 = model::SystemParams<f32>;
pub type RegimeSummary = model::RegimeSummary<f64>;
pub type TimeSeries = series::TimeSeries<f64>;
pub type TimeSeriesF32 = series::TimeSeries<f32>;
pub type MeanFieldState = semiclassical::MeanFieldState<f64>;
pub type DickeLadderState = collective::DickeLadderState<f64>;
pub type DensityMatrix = sector::DensityMatrix;
pub type CumulantState = cumulant::CumulantState;
