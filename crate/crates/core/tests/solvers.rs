// SPDX-License-Identifier: Apache-2.0

//! Cross-solver agreement on small systems.

use nuclear_sr::cumulant::{evolve_cumulant, independent_reference, init_cumulant, CumulantOptions};
use nuclear_sr::io::RunConfig;
use nuclear_sr::model::{random_couplings, InitialStateKind};
use nuclear_sr::SystemParams;
use nuclear_sr::ode::{uniform_grid, Tolerances};
use nuclear_sr::run::{execute, RunResult};
use nuclear_sr::TimeSeries;
use proptest::prelude::*;

fn run(text: &str) -> RunResult {
    let cfg = RunConfig::parse(text).unwrap().resolve().unwrap();
    execute(&cfg, None).unwrap()
}

fn sup_relative(a: &TimeSeries, b: &TimeSeries) -> f64 {
    let peak = b.intensity.iter().copied().fold(0.0, f64::max);
    a.intensity_sup_distance(b).unwrap() / peak
}

#[test]
fn exact_and_symmetric_basis_agree() {
    for (n, extra) in [(2, ""), (6, ""), (2, "compensate = true\n"), (6, "m_s = 0.5\n")] {
        let common = format!("n = {n}\nepsilon = 0.7\nrtol = 1e-11\natol = 1e-13\nsamples = 200\n{extra}");
        let exact = run(&format!("solver = \"exact\"\n{common}"));
        let coll = run(&format!("solver = \"collective\"\n{common}"));
        let sup = exact.series.intensity_sup_distance(&coll.series).unwrap();
        assert!(sup < 1e-8, "n = {n} {extra}: {sup:e}");
    }
}

#[test]
fn reduced_tracks_exact_at_weak_coupling() {
    // Elimination error shrinks like epsilon^2: about 11% at 0.2, 3% at 0.1.
    for seed in [1, 2] {
        let common = format!("n = 6\nepsilon = 0.1\ncouplings = \"random\"\nseed = {seed}\nm_s = -0.5\nsamples = 300\n");
        let exact = run(&format!("solver = \"exact\"\n{common}"));
        let reduced = run(&format!("solver = \"reduced\"\n{common}"));
        // Skip the initial electron transient of a few `1/gamma_r`, absent after elimination.
        let gamma_r = RunConfig::parse(&format!("solver = \"exact\"\n{common}")).unwrap().resolve().unwrap().gamma_r.unwrap();
        let peak = exact.series.intensity.iter().copied().fold(0.0, f64::max);
        let dev = (0..exact.series.len())
            .filter(|k| exact.series.t[*k] > 5.0 / gamma_r)
            .map(|k| (exact.series.intensity[k] - reduced.series.intensity[k]).abs())
            .fold(0.0, f64::max)
            / peak;
        assert!(dev < 0.05, "seed {seed}: {dev}");
    }
}

#[test]
fn compact_independent_system_matches_pinned_full_system() {
    let profile: nuclear_sr::CouplingProfile = random_couplings(5, 0.2, 3).unwrap();
    let params = SystemParams::for_epsilon(0.7, 1.0, false).unwrap();
    let start = init_cumulant(&profile, 0.8, InitialStateKind::Product).unwrap();
    let grid = uniform_grid(400.0, 100);
    let opts = CumulantOptions { tolerances: Tolerances::new(1e-10, 1e-12), ..CumulantOptions::default() };
    let compact = independent_reference(&start, &profile, &params, &grid, &opts).unwrap();
    let full = evolve_cumulant(&start, &profile, &params, &grid, &CumulantOptions { independent: true, ..opts }).unwrap();
    let dev = sup_relative(&compact.series, &full.series);
    assert!(dev < 1e-7, "{dev}");
}

#[test]
fn cumulant_follows_exact_for_few_spins() {
    let common = "n = 4\nepsilon = 0.7\ncouplings = \"random\"\nseed = 11\ncompensate = true\nsamples = 300\n";
    let exact = run(&format!("solver = \"exact\"\n{common}"));
    let cum = run(&format!("solver = \"cumulant\"\n{common}"));
    let (a, b) = (cum.summary.relative_peak.unwrap(), exact.summary.relative_peak.unwrap());
    assert!(((a - b) / b).abs() < 0.25, "{a} vs {b}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn exact_runs_conserve_trace_and_photons(seed in 0u64..1000, n in 1usize..4, eps in 0.2f64..0.95, pol in 0.2f64..1.0) {
        let r = run(&format!(
            "solver = \"exact\"\nn = {n}\nepsilon = {eps}\ncouplings = \"random\"\nseed = {seed}\npolarization = {pol}\nsamples = 80\n"
        ));
        prop_assert!(r.invariants.max_trace_error.unwrap() < 1e-9);
        prop_assert!(r.invariants.max_hermiticity_error.unwrap() < 1e-9);
        prop_assert!(r.invariants.relative_bookkeeping.unwrap() < 1e-6);
        prop_assert!(r.series.intensity.iter().all(|i| *i >= -1e-12));
        prop_assert!(r.series.excitation.windows(2).all(|w| w[1] <= w[0] + 1e-9));
    }

    #[test]
    fn cumulant_runs_keep_bookkeeping(seed in 0u64..1000, n in 2usize..12, eps in 0.3f64..0.99) {
        let r = run(&format!(
            "solver = \"cumulant\"\nn = {n}\nepsilon = {eps}\ncouplings = \"random\"\nseed = {seed}\ncompensate = true\nsamples = 60\n"
        ));
        prop_assert!(r.invariants.relative_bookkeeping.unwrap() < 1e-6);
        prop_assert!(r.series.excitation.iter().all(|x| *x >= -1e-9 && *x <= n as f64 + 1e-9));
    }
}
