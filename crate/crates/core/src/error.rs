// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failure of the adaptive integrator. Times are reported in `f64` regardless of the scalar type.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrationError {
    #[error("step size collapsed to {step:e} at t = {last_good_time}")]
    StepTooSmall { last_good_time: f64, step: f64 },
    #[error("exceeded {max_steps} steps; last good time t = {last_good_time}")]
    MaxSteps { last_good_time: f64, max_steps: usize },
    #[error("non-finite state encountered after t = {last_good_time}")]
    NonFinite { last_good_time: f64 },
    #[error("aborted by observer at t = {last_good_time}: {reason}")]
    Aborted { last_good_time: f64, reason: String },
}

impl IntegrationError {
    pub fn last_good_time(&self) -> f64 {
        match self {
            Self::StepTooSmall { last_good_time, .. }
            | Self::MaxSteps { last_good_time, .. }
            | Self::NonFinite { last_good_time }
            | Self::Aborted { last_good_time, .. } => *last_good_time,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("degenerate: zero pump rate (epsilon = 1 requires Gamma_r = 0)")]
    ZeroPumpRate,
    #[error("no active nuclei in the sampled environment")]
    NoActiveNuclei,
    #[error("{n} nuclei exceed the {solver} solver limit of {limit}; use the collective (homogeneous) or cumulant solver instead")]
    Capacity { solver: &'static str, n: usize, limit: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("collective solver requires homogeneous couplings")]
    NotHomogeneous,
    #[error("anisotropic coupling tensors are only supported by the exact solver")]
    Anisotropic,
    #[error("closure gap: no factorization rule for moment {0}")]
    ClosureGap(String),
    #[error("undefined ratio: reference intensity is zero")]
    UndefinedRatio,
    #[error("invariant violated at t = {time}: {what} (value {value:e}, tolerance {tolerance:e})")]
    Invariant { time: f64, what: String, value: f64, tolerance: f64 },
    #[error(transparent)]
    Integration(#[from] IntegrationError),
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl Error {
    pub fn param(msg: impl Into<String>) -> Self {
        Self::Parameter(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }
}
