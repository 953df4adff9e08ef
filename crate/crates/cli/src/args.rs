// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nuclear_sr::io::Solver;

#[derive(Parser, Debug)]
#[command(name = "nsr", version, about = "Superradiant emission from hyperfine-coupled nuclear spins")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run one solver; writes the series, resolved config and manifest.
    Simulate {
        #[arg(value_enum)]
        solver: SolverArg,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Repeat a run over one parameter and tabulate relative peaks.
    Sweep {
        #[arg(value_enum)]
        axis: Axis,
        /// Comma-separated parameter values.
        #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
        values: Vec<String>,
        #[arg(long, value_enum, default_value = "cumulant")]
        solver: SolverArg,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Cumulant run against an exact oracle on the same grid.
    Compare {
        #[arg(long, value_enum)]
        oracle: Oracle,
        /// Allowed relative deviation of peak height and peak time.
        #[arg(long, default_value_t = 0.25)]
        tolerance: f64,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Random NV environments of fixed sizes; ensemble-mean relative peaks.
    Ensemble {
        #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
        n_values: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        environments: u64,
        #[arg(long, value_enum, default_value = "exact")]
        solver: SolverArg,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Mean-field steady-state scan up and down in one parameter.
    Scan(ScanArgs),
    /// SVG line plot of intensity series.
    Plot {
        #[arg(required = true)]
        series: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        log: bool,
        /// Legend labels in series order (default: manifest label or file stem).
        #[arg(long)]
        label: Vec<String>,
    },
    /// Re-execute a run from its manifest and check the series is unchanged.
    Rerun {
        #[arg(long)]
        manifest: PathBuf,
        /// Output root (default: `rerun` next to the original run directory).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverArg {
    Exact,
    Collective,
    Reduced,
    Cumulant,
}

impl From<SolverArg> for Solver {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Exact => Solver::Exact,
            SolverArg::Collective => Solver::Collective,
            SolverArg::Reduced => Solver::Reduced,
            SolverArg::Cumulant => Solver::Cumulant,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    N,
    Epsilon,
    Polarization,
}

impl Axis {
    pub fn key(self) -> &'static str {
        match self {
            Axis::N => "n",
            Axis::Epsilon => "epsilon",
            Axis::Polarization => "polarization",
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Oracle {
    Exact,
    Collective,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitialArg {
    Product,
    DickeMixture,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum CouplingArg {
    Homogeneous,
    Gaussian,
    Random,
    Nv,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScanParam {
    OmegaX,
    GammaR,
    OmegaS,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum DriveArg {
    Nuclei,
    Both,
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    /// TOML run description; flags override its keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Root directory for run directories.
    #[arg(long, default_value = "runs")]
    pub out: PathBuf,
    /// Replace an existing run directory with the same content hash.
    #[arg(long)]
    pub force: bool,
    /// Worker threads for sweeps and ensembles.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    #[command(flatten)]
    pub keys: ConfigKeys,
}

/// One flag per config key.
#[derive(Args, Debug, Clone, Default)]
pub struct ConfigKeys {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub gamma_r: Option<f64>,
    /// Electron splitting in units of A; `half-A` is accepted for 0.5.
    #[arg(long, value_parser = parse_detuning, allow_hyphen_values = true)]
    pub detuning: Option<f64>,
    #[arg(long)]
    pub compensate: bool,
    #[arg(long)]
    pub ladder: bool,
    #[arg(long, allow_hyphen_values = true)]
    pub m_s: Option<f64>,
    #[arg(long)]
    pub polarization: Option<f64>,
    #[arg(long, value_enum)]
    pub initial_state: Option<InitialArg>,
    #[arg(long, value_enum)]
    pub couplings: Option<CouplingArg>,
    #[arg(long)]
    pub width: Option<f64>,
    #[arg(long)]
    pub min_coupling: Option<f64>,
    /// Shell table (radius, MHz, multiplicity, first-shell flag); implies `--couplings nv`.
    #[arg(long)]
    pub nv_table: Option<PathBuf>,
    #[arg(long)]
    pub nv_shells: Option<usize>,
    #[arg(long)]
    pub concentration: Option<f64>,
    #[arg(long)]
    pub cutoff: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub rtol: Option<f64>,
    #[arg(long)]
    pub atol: Option<f64>,
    #[arg(long)]
    pub bookkeeping_abort: Option<f64>,
    #[arg(long)]
    pub label: Option<String>,
    #[arg(long)]
    pub format_version: Option<u32>,
}

#[derive(Args, Debug, Clone)]
pub struct ScanArgs {
    #[arg(long, value_enum, default_value = "omega-x")]
    pub param: ScanParam,
    #[arg(long, allow_hyphen_values = true)]
    pub from: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub to: f64,
    #[arg(long, default_value_t = 41)]
    pub points: usize,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 1.0)]
    pub gamma_r: f64,
    #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
    pub omega_s: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub omega_x: f64,
    #[arg(long, value_enum, default_value = "nuclei")]
    pub drive: DriveArg,
    #[arg(long, default_value = "scan")]
    pub out: PathBuf,
}

fn parse_detuning(s: &str) -> Result<f64, String> {
    match s.to_ascii_lowercase().as_str() {
        "half-a" | "a/2" => Ok(0.5),
        "a" => Ok(1.0),
        other => other.parse().map_err(|_| format!("expected a number or `half-A`, got `{s}`")),
    }
}
