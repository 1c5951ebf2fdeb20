//! One test per primary acceptance criterion. Each prints a single
//! `PASS`/`FAIL` line to stderr (uncaptured) and then asserts. Tests take a
//! shared lock so runtimes are measured without contention.

use std::io::Write;
use std::path::PathBuf;
use std::sync::Mutex;
use std::time::Instant;

use num_complex::Complex64 as C64;
use quasilocal::chain::{build_hamiltonian, sample_disorder};
use quasilocal::circuit::{conjugate_operator, Circuit, Direction};
use quasilocal::experiment::{run, EntropySource, ExperimentConfig, ExperimentKind, ExperimentRecord, Seeds, TrotterMode};
use quasilocal::family::{sample_circuit, FamilyParams, ForcedRegion};
use quasilocal::flow::{run_flow, FlowOptions};
use quasilocal::observables::{entanglement_entropy, swap_extremal_state, telescopic_decompose};
use quasilocal::trotter::{conjugation_error, random_bond_generator, TrotterScheme};
use quasilocal::{to_dense_with_limit, OperatorSum, PauliString, SupportInterval};

static LOCK: Mutex<()> = Mutex::new(());

const LN2: f64 = std::f64::consts::LN_2;

const FLOW_TOLERANCE: f64 = 1e-8;
const FLOW_BUDGET_SECONDS: f64 = 120.0;
const RECONSTRUCTION_TOLERANCE: f64 = 1e-10;
const AREA_FRACTION: f64 = 0.05;
const LRB_BUDGET_SECONDS: f64 = 600.0;
const TROTTER_STEP_SLOPE: f64 = -1.0;
const TROTTER_STEP_SLACK: f64 = 0.15;
const TROTTER_NORM_SLOPE: f64 = 2.0;
const TROTTER_NORM_SLACK: f64 = 0.2;
const CONE_TOLERANCE: f64 = 1e-12;

fn report(name: &str, pass: bool, detail: String) {
    let line = format!("{} {name}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "{name}: {detail}");
}

fn lock() -> std::sync::MutexGuard<'static, ()> {
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

/// Run and keep the artifacts under the test scratch directory.
fn run_saved(tag: &str, config: &ExperimentConfig) -> ExperimentRecord {
    let record = run(config).unwrap_or_else(|e| panic!("{tag}: {e}"));
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance").join(tag);
    std::fs::create_dir_all(&dir).unwrap();
    record.write(&dir).unwrap();
    record
}

fn f(v: &serde_json::Value) -> f64 {
    v.as_f64().unwrap_or(f64::NAN)
}

fn flow_config() -> ExperimentConfig {
    let mut c = ExperimentConfig::new(ExperimentKind::Flow);
    c.chain.length = 8;
    c.chain.gamma = 0.05;
    c.seeds = Seeds::Count(20);
    c.flow.tolerance = FLOW_TOLERANCE;
    c
}

fn family_tails_config(seeds: u64) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(ExperimentKind::FamilyTails);
    c.chain.length = 12;
    c.seeds = Seeds::Count(seeds);
    c.family.chi = 0.01;
    c.family.c_prime = 1.0;
    c.family.epsilon = 0.0;
    c.family.k_max = 2;
    c.tails.c_max = 6;
    c
}

fn jscaling_config(seeds: u64) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(ExperimentKind::Jscaling);
    c.chain.length = 10;
    c.chain.gamma = 0.02;
    c.seeds = Seeds::Count(seeds);
    c.jscaling.tail_check = false;
    c
}

fn area_config(gamma: f64, seeds: u64) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(ExperimentKind::Entropy);
    c.chain.length = 12;
    c.chain.gamma = gamma;
    c.seeds = Seeds::Count(seeds);
    c.entropy.source = EntropySource::Exact;
    c.entropy.cuts = vec![6];
    c
}

fn forced_config(n_r: usize) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(ExperimentKind::Entropy);
    c.chain.length = 12;
    c.seeds = Seeds::Count(1);
    c.entropy.source = EntropySource::Family;
    c.entropy.cuts = vec![6];
    c.family.k_max = 2;
    c.family.forced_regions = vec![ForcedRegion {
        k: 2,
        lo: 6 - n_r / 2,
        hi: 5 + n_r / 2,
    }];
    c
}

fn lrb_config(gamma: f64, seeds: u64) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(ExperimentKind::Lrb);
    c.chain.length = 12;
    c.chain.gamma = gamma;
    c.seeds = Seeds::Count(seeds);
    c.lrb.t_min = 1.0;
    c.lrb.t_max = 1e4;
    c.lrb.n_times = 25;
    c
}

fn timeavg_config() -> ExperimentConfig {
    let mut c = ExperimentConfig::new(ExperimentKind::Timeavg);
    c.chain.length = 6;
    c.chain.gamma = 0.5;
    c.seeds = Seeds::Count(25);
    c.timeavg.times = vec![0.5, 5.0, 50.0, 500.0];
    c.timeavg.patch_size = 2;
    c.timeavg.collar = Some(1);
    c
}

fn trotter_steps_config() -> ExperimentConfig {
    let mut c = ExperimentConfig::new(ExperimentKind::Trotter);
    c.chain.length = 8;
    c.seeds = Seeds::Count(5);
    c.trotter.mode = TrotterMode::Unitary;
    c.trotter.steps = vec![1, 2, 4, 8, 16];
    c.trotter.gate_norms = vec![0.1];
    c
}

fn trotter_norms_config() -> ExperimentConfig {
    let mut c = ExperimentConfig::new(ExperimentKind::Trotter);
    c.chain.length = 8;
    c.seeds = Seeds::Count(5);
    c.trotter.mode = TrotterMode::Conjugation;
    c.trotter.steps = vec![1];
    c.trotter.gate_norms = vec![0.0125, 0.025, 0.05, 0.1];
    c
}

#[test]
fn flow_correctness() {
    let _g = lock();
    let r = run_saved("flow", &flow_config());
    let s = &r.summary;
    let elapsed = r.wall_clock_seconds;
    let pass = r.pass() && r.table.as_ref().unwrap().rows.len() == 20 && elapsed < FLOW_BUDGET_SECONDS;
    report(
        "flow correctness (L=8, gamma=0.05, 20 seeds)",
        pass,
        format!(
            "max residual {:.2e}, max |dlambda| {:.2e}, {:.1}s",
            f(&s["max_residual"]),
            f(&s["max_eig_error"]),
            elapsed
        ),
    );
}

#[test]
fn collar_bound_on_sampled_family() {
    let _g = lock();
    let r = run_saved("family-tails", &family_tails_config(20));
    let s = &r.summary;
    let rows = r.table.as_ref().unwrap().rows.len();
    let certified = s["bound_certified_by_upper"] == true;
    let violations = r.checks[0].detail.as_array().map_or(usize::MAX, |v| v.len());
    report(
        "collar bound on sampled family (chi=0.01, L=12, 20 seeds, c=0..6)",
        r.pass() && rows == 20 * 7 && certified,
        format!(
            "{violations} violations over {rows} rows, alpha {:.3}, certified upper bounds also below the bound: {certified}",
            f(&s["alpha"])
        ),
    );
}

#[test]
fn telescopic_reconstruction() {
    let _g = lock();
    let n = 8;
    let mut circuits: Vec<(String, Circuit)> = Vec::new();
    for seed in 1..=3 {
        let h = build_hamiltonian(&sample_disorder(seed, n, 0.05).unwrap()).unwrap();
        circuits.push((format!("flow seed {seed}"), run_flow(&h, &FlowOptions::default()).unwrap().circuit().unwrap()));
        let sc = sample_circuit(&FamilyParams::new(0.01, 1.0, 0.0, 2, n, seed)).unwrap();
        circuits.push((format!("family seed {seed}"), sc.circuit));
    }
    let mut worst = 0.0f64;
    let mut cases = 0;
    for (_, circuit) in &circuits {
        for site in [0, 3, n - 1] {
            for direction in [Direction::PhysicalToLogical, Direction::LogicalToPhysical] {
                let x = OperatorSum::from_word(PauliString::sigma_z(n, site), C64::new(1.0, 0.0));
                let xc = conjugate_operator(circuit, &x, direction, 12).unwrap();
                let d = telescopic_decompose(&xc, SupportInterval::site(site)).unwrap();
                let xd = to_dense_with_limit(&x, 12).unwrap();
                let full = circuit.conjugate_dense(xd.mat(), direction).unwrap();
                worst = worst.max(d.reconstruction_error(&full, 12).unwrap());
                cases += 1;
            }
        }
    }
    report(
        "telescopic reconstruction",
        worst < RECONSTRUCTION_TOLERANCE,
        format!("{cases} decompositions, max error {worst:.2e}"),
    );
}

#[test]
fn coupling_range_scaling() {
    let _g = lock();
    let r = run_saved("jscaling", &jscaling_config(10));
    let s = &r.summary;
    let monotone = s["monotone_beyond_2"] == true;
    let slope = f(&s["fit"]["slope"]);
    let t_ci = (f(&s["fit"]["slope_ci"][0]), f(&s["fit"]["slope_ci"][1]));
    let boot = (f(&s["seed_bootstrap_ci"][0]), f(&s["seed_bootstrap_ci"][1]));
    let excludes = slope < 0.0 && t_ci.1 < 0.0 && boot.1 < 0.0;
    report(
        "coupling range scaling (L=10, gamma=0.02, 10 seeds)",
        monotone && excludes,
        format!(
            "monotone for d>=2: {monotone}, rate {slope:.3}, t CI [{:.3}, {:.3}], seed bootstrap CI [{:.3}, {:.3}]",
            t_ci.0, t_ci.1, boot.0, boot.1
        ),
    );
}

#[test]
fn area_law_trend() {
    let _g = lock();
    let gammas = [0.02, 0.05, 0.1];
    let means: Vec<f64> = gammas
        .iter()
        .map(|&g| {
            let r = run_saved(&format!("entropy-gamma-{g}"), &area_config(g, 3));
            f(&r.summary["lengths"][0]["cuts"][0]["mean"])
        })
        .collect();
    let volume = 6.0 * LN2;
    let small = means[1] < AREA_FRACTION * volume;
    let monotone = means.windows(2).all(|w| w[1] > w[0]);

    let sizes = [2usize, 4, 6];
    let maxima: Vec<f64> = sizes
        .iter()
        .map(|&n_r| {
            let r = run_saved(&format!("entropy-forced-{n_r}"), &forced_config(n_r));
            f(&r.summary["lengths"][0]["cuts"][0]["max"])
        })
        .collect();
    let grows = maxima.windows(2).all(|w| w[1] > w[0]);
    let capped = sizes.iter().zip(&maxima).all(|(&n_r, &m)| m <= n_r as f64 * LN2 + 1e-10);
    let swap: Vec<f64> = sizes
        .iter()
        .map(|&n_r| {
            let (state, cut) = swap_extremal_state(n_r / 2).unwrap();
            entanglement_entropy(&state, cut).unwrap()
        })
        .collect();
    let attained = sizes.iter().zip(&swap).all(|(&n_r, &s)| (s - n_r as f64 * LN2).abs() < 1e-10);
    report(
        "area-law trend (L=12, middle cut)",
        small && monotone && grows && capped && attained,
        format!(
            "means {:.4?} over gamma {gammas:?} (5% of volume law = {:.4}); forced n_r {sizes:?} max {:.3?}, swap {:.3?}",
            means,
            AREA_FRACTION * volume,
            maxima,
            swap
        ),
    );
}

#[test]
fn lightcone_discrimination() {
    let _g = lock();
    let start = Instant::now();
    let slow = run_saved("lrb-gamma-0.05", &lrb_config(0.05, 4));
    let fast = run_saved("lrb-gamma-1", &lrb_config(1.0, 4));
    let elapsed = start.elapsed().as_secs_f64();
    let r2 = |r: &ExperimentRecord| (f(&r.summary["fits"]["log"]["r2"]), f(&r.summary["fits"]["linear"]["r2"]));
    let (sl, sn) = r2(&slow);
    let (fl, fn_) = r2(&fast);
    report(
        "lightcone discrimination (L=12, t in [1, 1e4], 4 seeds)",
        sl > sn && fn_ > fl && elapsed < LRB_BUDGET_SECONDS,
        format!("gamma=0.05 log R2 {sl:.4} vs linear {sn:.4}; gamma=1 log {fl:.4} vs linear {fn_:.4}; {elapsed:.0}s"),
    );
}

#[test]
fn time_average_bound() {
    let _g = lock();
    let r = run_saved("timeavg", &timeavg_config());
    let s = &r.summary;
    report(
        "time-average commutator bound (L=6, 100 cases)",
        r.pass() && s["cases"] == 100,
        format!(
            "{} cases, {} patch checks, max residual/bound {:.3}",
            s["cases"],
            s["patch_checks"],
            f(&s["max_residual_over_bound"])
        ),
    );
}

#[test]
fn trotter_scaling() {
    let _g = lock();
    let steps = run_saved("trotter-steps", &trotter_steps_config());
    let norms = run_saved("trotter-norms", &trotter_norms_config());
    let step_slope = f(&steps.summary["error_vs_steps"][0]["fit"]["slope"]);
    let norm_slope = f(&norms.summary["error_vs_gate_norm"][0]["fit"]["slope"]);

    let n = 10;
    let x = OperatorSum::from_word(PauliString::sigma_z(n, 5), C64::new(1.0, 0.0));
    let mut cone = 0.0f64;
    let mut cone_ok = norms.pass();
    for seed in 1..=3 {
        let a = random_bond_generator(n, 0.1, seed).unwrap();
        for steps in 1..=3 {
            for c in [2 * steps, 2 * steps + 1] {
                match conjugation_error(&x, &a, steps, c, TrotterScheme::BOND, 12) {
                    Ok(e) => cone = cone.max(e.cone_difference),
                    Err(_) => cone_ok = false,
                }
            }
        }
    }
    cone_ok &= cone < CONE_TOLERANCE;
    let pass = (step_slope - TROTTER_STEP_SLOPE).abs() <= TROTTER_STEP_SLACK
        && (norm_slope - TROTTER_NORM_SLOPE).abs() <= TROTTER_NORM_SLACK
        && cone_ok;
    report(
        "trotter scaling",
        pass,
        format!("error vs N slope {step_slope:.3}, error vs gate norm slope {norm_slope:.3}, collared vs whole chain {cone:.2e}"),
    );
}

#[test]
fn exact_identities() {
    let _g = lock();
    let r = run_saved("bounds", &ExperimentConfig::new(ExperimentKind::Bounds));
    let failed: Vec<&str> = r.failures().iter().map(|c| c.name.as_str()).collect();
    report(
        "bound-lab exact identities",
        r.pass(),
        format!("{} checks, failed {failed:?}", r.checks.len()),
    );
}

#[test]
fn determinism() {
    let _g = lock();
    let reduced = |mut c: ExperimentConfig, seeds: u64| {
        c.seeds = Seeds::Count(seeds);
        c
    };
    let configs = vec![
        ("timeavg", timeavg_config()),
        ("trotter-steps", trotter_steps_config()),
        ("trotter-norms", trotter_norms_config()),
        ("bounds", ExperimentConfig::new(ExperimentKind::Bounds)),
        ("flow", reduced(flow_config(), 3)),
        ("family-tails", reduced(family_tails_config(20), 1)),
        ("jscaling", reduced(jscaling_config(10), 2)),
        ("entropy", reduced(area_config(0.05, 3), 1)),
        ("entropy-forced", forced_config(4)),
        ("lrb", reduced(lrb_config(0.05, 4), 1)),
    ];
    let mut differing = Vec::new();
    for (tag, config) in &configs {
        let a = run(config).unwrap().files().unwrap();
        let mut again = config.clone();
        again.threads = if config.threads == 1 { 2 } else { 1 };
        let b = run(&again).unwrap().files().unwrap();
        for (name, bytes) in &a {
            if name != "config.toml" && b.get(name) != Some(bytes) {
                differing.push(format!("{tag}/{name}"));
            }
        }
    }
    report(
        "determinism",
        differing.is_empty(),
        format!(
            "{} experiments re-run with a different thread count; differing files {differing:?}",
            configs.len()
        ),
    );
}
