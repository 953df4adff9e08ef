// SPDX-License-Identifier: Apache-2.0

//! Merges a config file with command-line flags.

use std::fs;
use std::path::Path;

use nuclear_sr::io::{RunConfig, Solver};
use nuclear_sr::{Error, Result};
use toml::{Table, Value};

use crate::args::{ConfigKeys, CouplingArg, InitialArg};

pub fn read_table(path: Option<&Path>) -> Result<Table> {
    match path {
        None => Ok(Table::new()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            text.parse::<Table>().map_err(|e| Error::Config(format!("{}: {e}", p.display())))
        }
    }
}

impl ConfigKeys {
    pub fn apply(&self, t: &mut Table) {
        let mut set = |k: &str, v: Value| {
            t.insert(k.to_string(), v);
        };
        let f = |v: f64| Value::Float(v);
        if let Some(v) = self.n {
            set("n", Value::Integer(v as i64));
        }
        if let Some(v) = self.epsilon {
            set("epsilon", f(v));
        }
        if let Some(v) = self.gamma_r {
            set("gamma_r", f(v));
        }
        if let Some(v) = self.detuning {
            set("detuning", f(v));
        }
        if self.compensate {
            set("compensate", Value::Boolean(true));
        }
        if self.ladder {
            set("ladder", Value::Boolean(true));
        }
        if let Some(v) = self.m_s {
            set("m_s", f(v));
        }
        if let Some(v) = self.polarization {
            set("polarization", f(v));
        }
        if let Some(v) = self.initial_state {
            let s = match v {
                InitialArg::Product => "product",
                InitialArg::DickeMixture => "dicke_mixture",
            };
            set("initial_state", Value::String(s.into()));
        }
        let couplings = self.couplings.or(self.nv_table.as_ref().map(|_| CouplingArg::Nv));
        if let Some(v) = couplings {
            let s = match v {
                CouplingArg::Homogeneous => "homogeneous",
                CouplingArg::Gaussian => "gaussian",
                CouplingArg::Random => "random",
                CouplingArg::Nv => "nv",
            };
            set("couplings", Value::String(s.into()));
        }
        if let Some(v) = self.width {
            set("width", f(v));
        }
        if let Some(v) = self.min_coupling {
            set("min_coupling", f(v));
        }
        if let Some(v) = &self.nv_table {
            set("nv_table", Value::String(v.display().to_string()));
        }
        if let Some(v) = self.nv_shells {
            set("nv_shells", Value::Integer(v as i64));
        }
        if let Some(v) = self.concentration {
            set("concentration", f(v));
        }
        if let Some(v) = self.cutoff {
            set("cutoff", f(v));
        }
        if let Some(v) = self.seed {
            set("seed", Value::Integer(v as i64));
        }
        if let Some(v) = self.t_max {
            set("t_max", f(v));
        }
        if let Some(v) = self.samples {
            set("samples", Value::Integer(v as i64));
        }
        if let Some(v) = self.rtol {
            set("rtol", f(v));
        }
        if let Some(v) = self.atol {
            set("atol", f(v));
        }
        if let Some(v) = self.bookkeeping_abort {
            set("bookkeeping_abort", f(v));
        }
        if let Some(v) = &self.label {
            set("label", Value::String(v.clone()));
        }
        if let Some(v) = self.format_version {
            set("format_version", Value::Integer(v as i64));
        }
    }
}

pub fn set_solver(t: &mut Table, solver: Solver) {
    t.insert("solver".into(), Value::String(solver.name().into()));
}

/// Deserializes and resolves a merged table.
pub fn resolve(t: &Table) -> Result<RunConfig> {
    let cfg: RunConfig = t.clone().try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    cfg.resolve()
}
