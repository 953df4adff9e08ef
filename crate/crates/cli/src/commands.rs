// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use nuclear_sr::io::{
    create_run_dir, fmt_float, read_manifest, read_series, save_config, write_manifest, write_populations,
    write_series, Manifest, RunConfig, RunStatus, Solver,
};
use nuclear_sr::plot::{intensity_svg, YScale};
use nuclear_sr::run::{execute, RunResult};
use nuclear_sr::semiclassical::{
    detect_hysteresis, branch_sup_distance, max_order_parameter_jump, steady_state_scan, write_branch_csv, Direction,
    DriveTarget, MeanFieldParams, MeanFieldState, ScanOptions, ScanParameter,
};
use nuclear_sr::series::{linear_fit, power_law_exponent};
use nuclear_sr::{Error, Result};
use serde_json::json;
use toml::Value;

use crate::args::{Axis, Command, DriveArg, Oracle, RunArgs, ScanArgs, ScanParam};
use crate::config::{read_table, resolve, set_solver};

pub fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Simulate { solver, run } => simulate(solver.into(), &run),
        Command::Sweep { axis, values, solver, run } => sweep(axis, &values, solver.into(), &run),
        Command::Compare { oracle, tolerance, run } => compare(oracle, tolerance, &run),
        Command::Ensemble { n_values, environments, solver, run } => ensemble(&n_values, environments, solver.into(), &run),
        Command::Scan(args) => scan(&args),
        Command::Plot { series, out, log, label } => plot(&series, &out, log, &label),
        Command::Rerun { manifest, out, force } => rerun(&manifest, out, force),
    }
}

fn base_table(solver: Solver, run: &RunArgs) -> Result<toml::Table> {
    let mut t = read_table(run.config.as_deref())?;
    set_solver(&mut t, solver);
    run.keys.apply(&mut t);
    Ok(t)
}

pub struct Completed {
    pub dir: PathBuf,
    pub result: RunResult,
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Executes one resolved config in its own run directory under `root`.
pub fn run_one(cfg: &RunConfig, root: &Path, force: bool) -> Result<Completed> {
    let dir = create_run_dir(root, cfg, force)?;
    save_config(cfg, &dir.join("config.toml"))?;
    let mut manifest = Manifest::new(cfg);
    let manifest_path = dir.join("manifest.jsonl");
    match execute(cfg, None) {
        Ok(result) => {
            write_series(&result.series, &dir.join("series.csv"))?;
            manifest.outputs = vec!["config.toml".into(), "series.csv".into()];
            if let Some(ladder) = &result.ladder {
                write_populations(ladder, &dir.join("populations.csv"))?;
                manifest.outputs.push("populations.csv".into());
            }
            manifest.summary = serde_json::to_value(result.summary).unwrap_or_default();
            manifest.invariants = serde_json::to_value(result.invariants).unwrap_or_default();
            manifest.finish(RunStatus::Ok);
            write_manifest(&manifest, &manifest_path)?;
            Ok(Completed { dir, result })
        }
        Err(e) => {
            let status = if matches!(e, Error::Invariant { .. }) { RunStatus::Aborted } else { RunStatus::Failed };
            let diag = dir.join("diagnostic.json");
            let detail = match &e {
                Error::Invariant { time, what, value, tolerance } => {
                    json!({"error": e.to_string(), "time": time, "check": what, "value": value, "tolerance": tolerance})
                }
                _ => json!({"error": e.to_string()}),
            };
            write_json(&diag, &detail)?;
            manifest.diagnostic = Some("diagnostic.json".into());
            manifest.message = Some(e.to_string());
            manifest.finish(status);
            write_manifest(&manifest, &manifest_path)?;
            Err(e)
        }
    }
}

fn report(c: &Completed) {
    let s = &c.result.summary;
    let opt = |v: Option<f64>| v.map_or("nan".to_string(), fmt_float);
    println!(
        "relative_peak {} peak_time {} plateau_ratio {} run_dir {}",
        opt(s.relative_peak),
        fmt_float(s.peak_time),
        opt(s.relative_peak_plateau),
        c.dir.display()
    );
}

fn simulate(solver: Solver, run: &RunArgs) -> Result<()> {
    let cfg = resolve(&base_table(solver, run)?)?;
    let done = run_one(&cfg, &run.out, run.force)?;
    report(&done);
    Ok(())
}

/// Runs `jobs` on `threads` workers; results keep the input order.
fn pool<J: Sync, R: Send>(jobs: &[J], threads: usize, f: impl Fn(&J) -> R + Sync) -> Vec<R> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..threads.clamp(1, jobs.len().max(1)) {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                if k >= jobs.len() {
                    break;
                }
                let r = f(&jobs[k]);
                slots.lock().unwrap()[k] = Some(r);
            });
        }
    });
    slots.into_inner().unwrap().into_iter().map(|r| r.expect("worker finished")).collect()
}

fn sweep(axis: Axis, values: &[String], solver: Solver, run: &RunArgs) -> Result<()> {
    let base = base_table(solver, run)?;
    let mut tables = Vec::new();
    let mut xs = Vec::new();
    for v in values {
        let mut t = base.clone();
        let x: f64 = v.trim().parse().map_err(|_| Error::Config(format!("bad sweep value `{v}`")))?;
        let value = match axis {
            Axis::N => Value::Integer(v.trim().parse::<i64>().map_err(|_| Error::Config(format!("n must be an integer, got `{v}`")))?),
            _ => Value::Float(x),
        };
        t.insert(axis.key().into(), value);
        t.remove("label");
        tables.push(t);
        xs.push(x);
    }
    let results = pool(&tables, run.threads, |t| resolve(t).and_then(|cfg| run_one(&cfg, &run.out, run.force)));
    fs::create_dir_all(&run.out).map_err(|e| Error::io(&run.out, e))?;
    let mut csv = String::from("value,relative_peak,peak_time\n");
    let mut failures = Vec::new();
    let (mut fx, mut fy) = (Vec::new(), Vec::new());
    let mut first_error = None;
    for (x, r) in xs.iter().zip(results) {
        match r {
            Ok(c) => {
                let s = c.result.summary;
                let rp = s.relative_peak.unwrap_or(f64::NAN);
                csv.push_str(&format!("{},{},{}\n", fmt_float(*x), fmt_float(rp), fmt_float(s.peak_time)));
                if rp.is_finite() {
                    fx.push(*x);
                    fy.push(rp);
                }
            }
            Err(e) => {
                eprintln!("sweep point {} failed: {e}", fmt_float(*x));
                csv.push_str(&format!("{},nan,nan\n", fmt_float(*x)));
                failures.push(json!({"value": x, "error": e.to_string(), "exit_code": crate::exit_code(&e)}));
                first_error.get_or_insert(e);
            }
        }
    }
    let csv_path = run.out.join(format!("sweep_{}.csv", axis.key()));
    fs::write(&csv_path, &csv).map_err(|e| Error::io(&csv_path, e))?;
    print!("{csv}");
    let mut summary = json!({"axis": axis.key(), "values": xs, "failures": failures});
    if axis == Axis::N && fx.len() >= 2 {
        let lin = linear_fit(&fx, &fy)?;
        println!("linear fit: slope {} intercept {} r_squared {}", fmt_float(lin.slope), fmt_float(lin.intercept), fmt_float(lin.r_squared));
        summary["linear_fit"] = serde_json::to_value(lin).unwrap_or_default();
        if let Ok(p) = power_law_exponent(&fx, &fy) {
            println!("power law: exponent {} r_squared {}", fmt_float(p.slope), fmt_float(p.r_squared));
            summary["power_law"] = serde_json::to_value(p).unwrap_or_default();
        }
    }
    write_json(&run.out.join(format!("sweep_{}.json", axis.key())), &summary)?;
    match first_error {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn compare(oracle: Oracle, tolerance: f64, run: &RunArgs) -> Result<()> {
    let mut base = base_table(Solver::Cumulant, run)?;
    base.remove("label");
    base.remove("ladder");
    let cum_cfg = resolve(&base)?;
    let mut ot = base.clone();
    set_solver(&mut ot, match oracle {
        Oracle::Exact => Solver::Exact,
        Oracle::Collective => Solver::Collective,
    });
    // Same grid for both runs.
    ot.insert("t_max".into(), Value::Float(cum_cfg.t_max.unwrap()));
    let oracle_cfg = resolve(&ot)?;
    let o = run_one(&oracle_cfg, &run.out, run.force)?;
    let c = run_one(&cum_cfg, &run.out, run.force)?;
    let (os, cs) = (&o.result.summary, &c.result.summary);
    let sup = c.result.series.intensity_sup_distance(&o.result.series)?;
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(f64::MIN_POSITIVE);
    let height_dev = match (cs.relative_peak, os.relative_peak) {
        (Some(a), Some(b)) => rel(a, b),
        _ => f64::NAN,
    };
    let time_dev = rel(cs.peak_time, os.peak_time);
    let pass = height_dev <= tolerance && time_dev <= tolerance;
    let report = json!({
        "oracle": oracle_cfg.solver.name(),
        "n": cum_cfg.n,
        "sup_intensity_deviation": sup,
        "sup_intensity_deviation_relative": sup / os.peak_intensity.max(f64::MIN_POSITIVE),
        "relative_peak_cumulant": cs.relative_peak,
        "relative_peak_oracle": os.relative_peak,
        "peak_height_deviation": height_dev,
        "peak_time_cumulant": cs.peak_time,
        "peak_time_oracle": os.peak_time,
        "peak_time_deviation": time_dev,
        "tolerance": tolerance,
        "pass": pass,
        "cumulant_dir": c.dir,
        "oracle_dir": o.dir,
    });
    let path = run.out.join(format!("compare_{}.json", cum_cfg.content_hash()?));
    write_json(&path, &report)?;
    println!(
        "sup_deviation {} peak_height_deviation {} peak_time_deviation {} {}",
        fmt_float(sup),
        fmt_float(height_dev),
        fmt_float(time_dev),
        if pass { "PASS" } else { "FAIL" }
    );
    Ok(())
}

fn ensemble(n_values: &[usize], environments: u64, solver: Solver, run: &RunArgs) -> Result<()> {
    let mut base = base_table(solver, run)?;
    base.insert("couplings".into(), Value::String("nv".into()));
    base.remove("label");
    let seed0 = run.keys.seed.unwrap_or(0);
    let mut jobs = Vec::new();
    for &n in n_values {
        for k in 0..environments {
            let mut t = base.clone();
            t.insert("n".into(), Value::Integer(n as i64));
            t.insert("seed".into(), Value::Integer((seed0 + k) as i64));
            jobs.push((n, t));
        }
    }
    let results = pool(&jobs, run.threads, |(_, t)| resolve(t).and_then(|cfg| run_one(&cfg, &run.out, run.force)));
    fs::create_dir_all(&run.out).map_err(|e| Error::io(&run.out, e))?;
    let mut csv = String::from("n,environments,mean_relative_peak,std_relative_peak,min_relative_peak,max_relative_peak\n");
    let mut first_error = None;
    for &n in n_values {
        let mut v = Vec::new();
        for ((jn, _), r) in jobs.iter().zip(&results) {
            if *jn != n {
                continue;
            }
            match r {
                Ok(c) => v.extend(c.result.summary.relative_peak),
                Err(e) => {
                    eprintln!("environment failed at n = {n}: {e}");
                    first_error.get_or_insert(crate::exit_code(e));
                }
            }
        }
        let m = v.len() as f64;
        let mean = v.iter().sum::<f64>() / m;
        let std = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0).max(1.0)).sqrt();
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        csv.push_str(&format!("{n},{},{},{},{},{}\n", v.len(), fmt_float(mean), fmt_float(std), fmt_float(lo), fmt_float(hi)));
    }
    let path = run.out.join("ensemble.csv");
    fs::write(&path, &csv).map_err(|e| Error::io(&path, e))?;
    print!("{csv}");
    match first_error {
        Some(_) => Err(results.into_iter().find_map(|r| r.err()).unwrap()),
        None => Ok(()),
    }
}

fn scan(a: &ScanArgs) -> Result<()> {
    if a.points < 2 {
        return Err(Error::Config("a scan needs at least two points".into()));
    }
    let mut params = MeanFieldParams::new(a.n, a.gamma_r, a.omega_s)?;
    params.drive = match a.drive {
        DriveArg::Nuclei => DriveTarget::Nuclei,
        DriveArg::Both => DriveTarget::Both,
    };
    let param = match a.param {
        ScanParam::OmegaX => ScanParameter::OmegaX,
        ScanParam::GammaR => ScanParameter::GammaR,
        ScanParam::OmegaS => ScanParameter::OmegaS,
    };
    let (lo, hi) = (a.from.min(a.to), a.from.max(a.to));
    let up: Vec<f64> = (0..a.points).map(|k| lo + (hi - lo) * k as f64 / (a.points - 1) as f64).collect();
    let down: Vec<f64> = up.iter().rev().copied().collect();
    let opts = ScanOptions::default();
    let seed_x = if param == ScanParameter::OmegaX { lo } else { a.omega_x };
    let seed = MeanFieldState::polarized(seed_x);
    let branch_up = steady_state_scan(param, &up, Direction::Up, &params, &seed, &opts)?;
    let last = branch_up.last().map(|p| p.state).unwrap_or(seed);
    let branch_down = steady_state_scan(param, &down, Direction::Down, &params, &last, &opts)?;
    fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    for (name, b) in [("branch_up.csv", &branch_up), ("branch_down.csv", &branch_down)] {
        let path = a.out.join(name);
        let mut buf = Vec::new();
        write_branch_csv(&mut buf, b).map_err(|e| Error::io(&path, e))?;
        fs::write(&path, buf).map_err(|e| Error::io(&path, e))?;
    }
    let in_ball = branch_up.iter().chain(&branch_down).all(|p| p.state.within_bloch_ball());
    let summary = json!({
        "param": format!("{param:?}"),
        "drive": params.drive,
        "points": a.points,
        "hysteresis": detect_hysteresis(&branch_up, &branch_down),
        "branch_distance": branch_sup_distance(&branch_up, &branch_down),
        "max_jump_up": max_order_parameter_jump(&branch_up),
        "max_jump_down": max_order_parameter_jump(&branch_down),
        "converged": branch_up.iter().chain(&branch_down).filter(|p| p.converged).count(),
        "within_bloch_ball": in_ball,
    });
    write_json(&a.out.join("scan_summary.json"), &summary)?;
    println!("{summary}");
    if !in_ball {
        return Err(Error::Invariant { time: f64::NAN, what: "Bloch-ball bound".into(), value: f64::NAN, tolerance: 0.5 + 1e-9 });
    }
    Ok(())
}

fn label_for(path: &Path) -> String {
    let manifest = path.with_file_name("manifest.jsonl");
    if let Ok(records) = read_manifest(&manifest) {
        if let Some(label) = records.last().and_then(|m| m.config.label.clone()) {
            return label;
        }
    }
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn plot(series: &[PathBuf], out: &Path, log: bool, labels: &[String]) -> Result<()> {
    let mut input = Vec::new();
    for (k, p) in series.iter().enumerate() {
        let ts = read_series(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
        let label = labels.get(k).cloned().unwrap_or_else(|| label_for(p));
        input.push((label, ts));
    }
    let svg = intensity_svg(&input, if log { YScale::Log } else { YScale::Linear });
    fs::write(out, svg).map_err(|e| Error::io(out, e))?;
    Ok(())
}

fn rerun(manifest: &Path, out: Option<PathBuf>, force: bool) -> Result<()> {
    let records = read_manifest(manifest)?;
    let record = records.last().ok_or_else(|| Error::Config(format!("{}: empty manifest", manifest.display())))?;
    if record.format_version != nuclear_sr::io::FORMAT_VERSION {
        return Err(Error::Config(format!("unsupported manifest format_version {}", record.format_version)));
    }
    let run_dir = manifest.parent().unwrap_or(Path::new("."));
    let root = out.unwrap_or_else(|| run_dir.parent().unwrap_or(Path::new(".")).join("rerun"));
    let cfg = record.config.resolve()?;
    let done = run_one(&cfg, &root, force)?;
    report(&done);
    let original = run_dir.join("series.csv");
    if original.exists() {
        let a = fs::read(&original).map_err(|e| Error::io(&original, e))?;
        let b_path = done.dir.join("series.csv");
        let b = fs::read(&b_path).map_err(|e| Error::io(&b_path, e))?;
        if a != b {
            return Err(Error::Invariant { time: f64::NAN, what: "rerun series differs from the original".into(), value: f64::NAN, tolerance: 0.0 });
        }
        println!("series identical to {}", original.display());
    }
    Ok(())
}
