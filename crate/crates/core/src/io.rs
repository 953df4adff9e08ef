// SPDX-License-Identifier: Apache-2.0

//! Run configuration, CSV series, manifests and run directories.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{
    default_width, gaussian_couplings, homogeneous_couplings, nv_fixed_size_environment, nv_sample_environment, parse_coupling_table,
    random_couplings, synthetic_nv_table, CouplingProfile, DetuningPolicy, InitialStateKind, SystemParams,
    NV_DEFAULT_CUTOFF,
};
use crate::series::{TimeSeries, CSV_HEADER};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    Exact,
    Collective,
    Reduced,
    Cumulant,
}

impl Solver {
    pub fn name(self) -> &'static str {
        match self {
            Solver::Exact => "exact",
            Solver::Collective => "collective",
            Solver::Reduced => "reduced",
            Solver::Cumulant => "cumulant",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CouplingKind {
    #[default]
    Homogeneous,
    /// Square lattice; `n` must be a perfect square.
    Gaussian,
    /// Uniform in `[min_coupling, 1]` before normalization.
    Random,
    /// Sampled NV-centre environment.
    Nv,
}

fn d_format() -> u32 {
    FORMAT_VERSION
}
fn d_detuning() -> f64 {
    0.5
}
fn d_polarization() -> f64 {
    1.0
}
fn d_min_coupling() -> f64 {
    0.2
}
fn d_concentration() -> f64 {
    0.011
}
fn d_cutoff() -> f64 {
    NV_DEFAULT_CUTOFF
}
fn d_shells() -> usize {
    12
}
fn d_samples() -> usize {
    400
}
fn d_rtol() -> f64 {
    1e-8
}
fn d_atol() -> f64 {
    1e-10
}
fn d_abort() -> f64 {
    1e-6
}

/// Run description. After [`RunConfig::resolve`] every optional field that
/// applies to the chosen solver and coupling kind is filled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "d_format")]
    pub format_version: u32,
    pub solver: Solver,
    /// Number of nuclei (resolved from the sample for NV environments).
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub gamma_r: Option<f64>,
    /// `omega_S` (fixed) or the compensation target `omega_0`, units of `A`.
    #[serde(default = "d_detuning")]
    pub detuning: f64,
    #[serde(default)]
    pub compensate: bool,
    /// Collective solver only: ideal Dicke-ladder rate equations instead of the
    /// symmetric-basis master equation.
    #[serde(default)]
    pub ladder: bool,
    #[serde(default)]
    pub m_s: f64,
    #[serde(default = "d_polarization")]
    pub polarization: f64,
    #[serde(default)]
    pub initial_state: InitialStateKind,
    #[serde(default)]
    pub couplings: CouplingKind,
    #[serde(default)]
    pub width: Option<f64>,
    #[serde(default = "d_min_coupling")]
    pub min_coupling: f64,
    #[serde(default)]
    pub nv_table: Option<PathBuf>,
    #[serde(default = "d_shells")]
    pub nv_shells: usize,
    #[serde(default = "d_concentration")]
    pub concentration: f64,
    #[serde(default = "d_cutoff")]
    pub cutoff: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub t_max: Option<f64>,
    /// Output intervals; the series has `samples + 1` rows.
    #[serde(default = "d_samples")]
    pub samples: usize,
    #[serde(default = "d_rtol")]
    pub rtol: f64,
    #[serde(default = "d_atol")]
    pub atol: f64,
    #[serde(default = "d_abort")]
    pub bookkeeping_abort: f64,
    #[serde(default)]
    pub label: Option<String>,
}

impl RunConfig {
    pub fn new(solver: Solver, n: usize) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            solver,
            n: Some(n),
            epsilon: None,
            gamma_r: None,
            detuning: d_detuning(),
            compensate: false,
            ladder: false,
            m_s: 0.0,
            polarization: d_polarization(),
            initial_state: InitialStateKind::Product,
            couplings: CouplingKind::Homogeneous,
            width: None,
            min_coupling: d_min_coupling(),
            nv_table: None,
            nv_shells: d_shells(),
            concentration: d_concentration(),
            cutoff: d_cutoff(),
            seed: 0,
            t_max: None,
            samples: d_samples(),
            rtol: d_rtol(),
            atol: d_atol(),
            bookkeeping_abort: d_abort(),
            label: None,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    fn lattice_side(&self, n: usize) -> Result<usize> {
        let l = (n as f64).sqrt().round() as usize;
        if l * l != n {
            return Err(Error::Config(format!("gaussian couplings need a square number of nuclei, got {n}")));
        }
        Ok(l)
    }

    /// Coupling profile in natural units (`A = 1`).
    pub fn profile(&self) -> Result<CouplingProfile> {
        let profile = match self.couplings {
            CouplingKind::Homogeneous => homogeneous_couplings(self.require_n()?)?,
            CouplingKind::Gaussian => {
                let l = self.lattice_side(self.require_n()?)?;
                gaussian_couplings(l, self.width.unwrap_or_else(|| default_width(l)))?
            }
            CouplingKind::Random => random_couplings(self.require_n()?, self.min_coupling, self.seed)?,
            CouplingKind::Nv => {
                let table = match &self.nv_table {
                    Some(p) => parse_coupling_table(&fs::read_to_string(p).map_err(|e| Error::io(p, e))?)?,
                    None => synthetic_nv_table(self.nv_shells),
                };
                // A given `n` conditions the sample on its size.
                let env: CouplingProfile = match self.n {
                    Some(n) => nv_fixed_size_environment(n, &table, self.cutoff, self.seed)?,
                    None => nv_sample_environment(self.concentration, &table, self.cutoff, self.seed)?,
                };
                env.to_natural_units().0
            }
        };
        if let Some(n) = self.n {
            if n != profile.n() {
                return Err(Error::Config(format!("config says n = {n} but the coupling profile has {} nuclei", profile.n())));
            }
        }
        Ok(profile)
    }

    fn require_n(&self) -> Result<usize> {
        self.n.ok_or_else(|| Error::Config("missing key `n`".into()))
    }

    pub fn system_params(&self) -> Result<SystemParams> {
        let gamma = self.gamma_r.ok_or_else(|| Error::Config("gamma_r unresolved".into()))?;
        let det = if self.compensate { DetuningPolicy::Compensated(self.detuning) } else { DetuningPolicy::Fixed(self.detuning) };
        Ok(SystemParams::new(gamma, det)?
            .with_polarization(self.polarization)?
            .with_initial_state(self.initial_state)
            .with_m_s(self.m_s))
    }

    /// Fills every derived field and validates the physics.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut r = self.clone();
        if r.format_version != FORMAT_VERSION {
            return Err(Error::Config(format!("unsupported format_version {} (expected {FORMAT_VERSION})", r.format_version)));
        }
        let profile = r.profile()?;
        r.n = Some(profile.n());
        if r.couplings == CouplingKind::Gaussian && r.width.is_none() {
            r.width = Some(default_width(r.lattice_side(profile.n())?));
        }
        let half_delta = |eps: f64| 0.5 / eps;
        match (r.epsilon, r.gamma_r) {
            (Some(eps), None) => {
                if !(eps > 0.0 && eps <= 1.0) {
                    return Err(Error::param(format!("epsilon must lie in (0, 1], got {eps}")));
                }
                let delta = half_delta(eps);
                let g2 = delta * delta - r.detuning * r.detuning;
                if g2 <= 0.0 {
                    return Err(Error::ZeroPumpRate);
                }
                r.gamma_r = Some(2.0 * g2.sqrt());
            }
            (None, Some(g)) => {
                r.epsilon = Some(0.5 / (0.5 * g).hypot(r.detuning));
            }
            (Some(eps), Some(g)) => {
                let implied = 0.5 / (0.5 * g).hypot(r.detuning);
                if (implied - eps).abs() > 1e-9 * eps {
                    return Err(Error::Config(format!("epsilon = {eps} and gamma_r = {g} disagree (gamma_r implies {implied})")));
                }
            }
            (None, None) => return Err(Error::Config("one of `epsilon` or `gamma_r` is required".into())),
        }
        let params = r.system_params()?;
        if r.t_max.is_none() {
            r.t_max = Some(default_t_max(&profile, &params));
        }
        if r.label.is_none() {
            r.label = Some(format!("{}-n{}-eps{}", r.solver.name(), profile.n(), fmt_float(r.epsilon.unwrap())));
        }
        if r.samples == 0 {
            return Err(Error::Config("samples must be positive".into()));
        }
        if !(r.rtol > 0.0 && r.atol > 0.0 && r.bookkeeping_abort > 0.0) {
            return Err(Error::Config("rtol, atol and bookkeeping_abort must be positive".into()));
        }
        Ok(r)
    }

    /// Content hash of the canonical TOML form.
    pub fn content_hash(&self) -> Result<String> {
        let text = self.to_toml()?;
        Ok(hex::encode(Sha256::digest(text.as_bytes()))[..16].to_string())
    }

    pub fn grid(&self) -> Result<Vec<f64>> {
        let t = self.t_max.ok_or_else(|| Error::Config("t_max unresolved".into()))?;
        if !(t > 0.0) {
            return Err(Error::Config(format!("t_max must be positive, got {t}")));
        }
        Ok(crate::ode::uniform_grid(t, self.samples))
    }
}

/// Three Dicke burst times `(ln N + 1)/c_r` plus the electron relaxation time.
pub fn default_t_max(profile: &CouplingProfile, params: &SystemParams) -> f64 {
    let r = crate::model::regime(profile, params);
    let n = profile.n() as f64;
    let burst = if r.c_r > 0.0 { 3.0 * (n.ln() + 1.0) / r.c_r } else { 0.0 };
    (burst + 10.0 / params.gamma_r).max(1.0)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    RunConfig::parse(&text)?.resolve()
}

pub fn save_config(config: &RunConfig, path: &Path) -> Result<()> {
    fs::write(path, config.to_toml()?).map_err(|e| Error::io(path, e))
}

/// Shortest decimal form that parses back to the same `f64`.
pub fn fmt_float(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub fn series_to_csv(ts: &TimeSeries) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for i in 0..ts.len() {
        let row = ts.row(i);
        let cells: Vec<String> = row.iter().map(|v| fmt_float(*v)).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

pub fn write_series(ts: &TimeSeries, path: &Path) -> Result<()> {
    fs::write(path, series_to_csv(ts)).map_err(|e| Error::io(path, e))
}

pub fn parse_series(text: &str) -> Result<TimeSeries> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == CSV_HEADER => {}
        Some(h) => return Err(Error::Config(format!("unexpected CSV header `{h}`"))),
        None => return Err(Error::Config("empty CSV".into())),
    }
    let mut ts = TimeSeries::with_capacity(0);
    for (k, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 6 {
            return Err(Error::Config(format!("line {}: expected 6 columns, found {}", k + 2, cells.len())));
        }
        let mut row = [0.0; 6];
        for (dst, c) in row.iter_mut().zip(&cells) {
            *dst = c.trim().parse().map_err(|_| Error::Config(format!("line {}: bad number `{c}`", k + 2)))?;
        }
        ts.push(row);
    }
    Ok(ts)
}

pub fn read_series(path: &Path) -> Result<TimeSeries> {
    parse_series(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

/// `m,p_m` long-format dump of Dicke-ladder populations.
pub fn write_populations(state: &crate::collective::DickeLadderState, path: &Path) -> Result<()> {
    let mut s = String::from("m,p_m\n");
    for (k, p) in state.populations.iter().enumerate() {
        s.push_str(&format!("{},{}\n", fmt_float(k as f64 - state.j), fmt_float(*p)));
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Aborted,
    Failed,
}

/// One JSON-lines manifest record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub config: RunConfig,
    pub seed: u64,
    pub versions: BTreeMap<String, String>,
    pub start_time: f64,
    pub end_time: f64,
    pub status: RunStatus,
    pub message: Option<String>,
    /// Diagnostic snapshot written on abort.
    pub diagnostic: Option<String>,
    pub invariants: serde_json::Value,
    pub summary: serde_json::Value,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(config: &RunConfig) -> Self {
        let mut versions = BTreeMap::new();
        versions.insert(env!("CARGO_PKG_NAME").to_string(), env!("CARGO_PKG_VERSION").to_string());
        Self {
            format_version: FORMAT_VERSION,
            config: config.clone(),
            seed: config.seed,
            versions,
            start_time: unix_now(),
            end_time: f64::NAN,
            status: RunStatus::Ok,
            message: None,
            diagnostic: None,
            invariants: serde_json::Value::Null,
            summary: serde_json::Value::Null,
            outputs: Vec::new(),
        }
    }

    pub fn finish(&mut self, status: RunStatus) {
        self.status = status;
        self.end_time = unix_now();
    }
}

pub fn unix_now() -> f64 {
    std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

pub fn write_manifest(manifest: &Manifest, path: &Path) -> Result<()> {
    let mut line = serde_json::to_string(manifest).map_err(|e| Error::Config(e.to_string()))?;
    line.push('\n');
    let mut f = fs::OpenOptions::new().create(true).append(true).open(path).map_err(|e| Error::io(path, e))?;
    f.write_all(line.as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<Vec<Manifest>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(k, l)| serde_json::from_str(l).map_err(|e| Error::Config(format!("{}: record {}: {e}", path.display(), k + 1))))
        .collect()
}

/// Creates `root/<content hash>`; refuses to reuse an existing directory unless `force`.
pub fn create_run_dir(root: &Path, config: &RunConfig, force: bool) -> Result<PathBuf> {
    let dir = root.join(config.content_hash()?);
    if dir.exists() {
        if !force {
            return Err(Error::Config(format!("run directory {} exists; pass --force to overwrite", dir.display())));
        }
        fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}
