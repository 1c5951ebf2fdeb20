//! One runner per experiment kind.

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde_json::json;

use super::config::{EntropySource, ExperimentConfig, ExperimentKind, SchemeName, TrotterMode};
use super::{schema, Check, Outcome, Table};
use crate::bounds::bound_report;
use crate::chain::{build_hamiltonian, sample_disorder};
use crate::circuit::{Circuit, StraddlePolicy};
use crate::dense::to_dense_with_limit;
use crate::error::{Error, Result};
use crate::family::{sample_circuit, FamilyParams};
use crate::fit::{bootstrap_ci, fit_series, FitModel, SeriesFit, BOOTSTRAP_RESAMPLES};
use crate::flow::{extract_js, max_coupling_by_range, run_flow, FlowOptions, FlowResult};
use crate::lanczos::LanczosOptions;
use crate::observables::{
    circuit_entropies, collar_bound, log_times, lrb_commutator, patch_commutators, spectrum_entropies, tail_profile,
    EntropyScan, LightconeGrid, LrbOptions, Spectrum, TailOptions, TailProfile,
};
use crate::operator::OperatorSum;
use crate::pauli::{PauliString, SupportInterval};
use crate::trotter::{build_trotter, conjugation_error, random_bond_generator, trotter_error, TrotterScheme};

/// Arithmetic slack allowed on inequality checks.
const SLACK: f64 = 1e-10;
/// Seed of every bootstrap in the summaries.
const BOOTSTRAP_SEED: u64 = 0x5eed;

pub(crate) fn dispatch(config: &ExperimentConfig) -> Result<Outcome> {
    match config.experiment {
        ExperimentKind::Flow => flow(config),
        ExperimentKind::Tails => tails(config),
        ExperimentKind::FamilyTails => family_tails(config),
        ExperimentKind::Entropy => entropy(config),
        ExperimentKind::Jscaling => jscaling(config),
        ExperimentKind::Lrb => lrb(config),
        ExperimentKind::Timeavg => timeavg(config),
        ExperimentKind::Trotter => trotter(config),
        ExperimentKind::Bounds => bounds(),
    }
}

fn outcome(table: Option<Table>, summary: serde_json::Value, checks: Vec<Check>) -> Outcome {
    Outcome {
        table,
        summary,
        checks,
        artifacts: BTreeMap::new(),
    }
}

fn sz(n: usize, i: usize) -> OperatorSum {
    OperatorSum::from_word(PauliString::sigma_z(n, i), C64::new(1.0, 0.0))
}

fn sx(n: usize, i: usize) -> OperatorSum {
    OperatorSum::from_word(PauliString::sigma_x(n, i), C64::new(1.0, 0.0))
}

fn flow_options(config: &ExperimentConfig) -> FlowOptions {
    FlowOptions {
        k_max: config.flow.k_max,
        eps_res: config.flow.eps_res,
        tolerance: config.flow.tolerance,
        max_retries: config.flow.max_retries,
        dense_limit: config.dense_limit,
        ..FlowOptions::default()
    }
}

fn chain_flow(config: &ExperimentConfig, seed: u64, length: usize) -> Result<(OperatorSum, FlowResult)> {
    let h = build_hamiltonian(&sample_disorder(seed, length, config.chain.gamma)?)?;
    let out = run_flow(&h, &flow_options(config))?;
    Ok((h, out))
}

fn tail_options(config: &ExperimentConfig) -> TailOptions {
    TailOptions {
        c_max: config.tails.c_max,
        direction: config.tails.direction,
        straddle: StraddlePolicy::Drop,
        dense_sites: config.tails.dense_sites,
        dense_limit: config.dense_limit,
        lanczos: LanczosOptions {
            max_iterations: config.tails.lanczos_max_iterations,
            tolerance: config.tails.lanczos_tolerance,
            ..TailOptions::default().lanczos
        },
        ..TailOptions::default()
    }
}

fn tail_sites(config: &ExperimentConfig, n: usize) -> Result<Vec<usize>> {
    if config.tails.sites.is_empty() {
        return Ok((0..n).collect());
    }
    if let Some(&i) = config.tails.sites.iter().find(|&&i| i >= n) {
        return Err(Error::Config {
            field: "tails.sites".into(),
            reason: format!("site {i} outside a chain of {n}"),
        });
    }
    Ok(config.tails.sites.clone())
}

/// `σz_i` tail profiles of `circuit` for every configured site.
fn site_profiles(config: &ExperimentConfig, circuit: &Circuit) -> Result<Vec<(usize, TailProfile)>> {
    let n = circuit.n_sites;
    let opts = tail_options(config);
    tail_sites(config, n)?
        .into_iter()
        .map(|i| Ok((i, tail_profile(&sz(n, i), circuit, SupportInterval::site(i), &opts)?)))
        .collect()
}

fn fit_json(f: Result<SeriesFit>) -> serde_json::Value {
    match f {
        Ok(f) => json!(f),
        Err(e) => json!({ "degenerate": e.to_string() }),
    }
}

fn flow(config: &ExperimentConfig) -> Result<Outcome> {
    let length = config.chain.length;
    let runs = config
        .seeds()
        .par_iter()
        .map(|&seed| {
            let (h, out) = chain_flow(config, seed, length)?;
            if out.diagonal.is_empty() {
                return Err(Error::invariant("flow spectrum", "dense diagonal unavailable"));
            }
            let mut exact = to_dense_with_limit(&h, config.dense_limit)?.hermitian_eigenvalues()?;
            let mut diag = out.diagonal.clone();
            exact.sort_by(f64::total_cmp);
            diag.sort_by(f64::total_cmp);
            let eig_error = exact.iter().zip(&diag).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let regions: usize = out.steps.iter().map(|s| s.regions.len()).sum();
            let mut js = Table::new(schema::COUPLINGS);
            for c in extract_js(&out.h_diag)? {
                js.push(vec![c.d.into(), c.s_bitmask.into(), c.j_s.into()])?;
            }
            Ok((seed, out.residual, eig_error, out.steps.len(), regions, js))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut table = Table::new(schema::FLOW);
    let mut artifacts = BTreeMap::new();
    for (seed, residual, err, steps, _, js) in &runs {
        table.push(vec![(*seed).into(), (*residual).into(), (*err).into(), (*steps).into()])?;
        artifacts.insert(format!("couplings/seed-{seed}.csv"), js.to_csv()?);
    }
    let max_residual = runs.iter().map(|r| r.1).fold(0.0, f64::max);
    let max_eig = runs.iter().map(|r| r.2).fold(0.0, f64::max);
    let tol = config.flow.tolerance;
    let checks = vec![
        Check::new("flow residual below tolerance", max_residual < tol, json!({ "max": max_residual, "tolerance": tol }))?,
        Check::new(
            "flow eigenvalues match dense diagonalization",
            max_eig < tol,
            json!({ "max": max_eig, "tolerance": tol }),
        )?,
    ];
    let summary = json!({
        "L": length,
        "gamma": config.chain.gamma,
        "runs": runs.len(),
        "max_residual": max_residual,
        "max_eig_error": max_eig,
        "resonance_regions": runs.iter().map(|r| r.4).sum::<usize>(),
    });
    Ok(Outcome {
        artifacts,
        ..outcome(Some(table), summary, checks)
    })
}

/// Mean over seeds of the per-seed `δ(c)` rows, by collar.
fn mean_by_collar(rows: &[(u64, usize, f64, f64)], c_max: usize) -> Vec<f64> {
    (0..=c_max)
        .map(|c| {
            let v: Vec<f64> = rows.iter().filter(|r| r.1 == c).map(|r| r.2).collect();
            v.iter().sum::<f64>() / v.len().max(1) as f64
        })
        .collect()
}

fn tails_table(rows: &[(u64, usize, f64, f64)]) -> Result<Table> {
    let mut table = Table::new(schema::TAILS);
    for &(seed, c, delta, bound) in rows {
        table.push(vec![seed.into(), c.into(), delta.into(), bound.into()])?;
    }
    Ok(table)
}

fn tails(config: &ExperimentConfig) -> Result<Outcome> {
    let length = config.chain.length;
    let per_seed = config
        .seeds()
        .par_iter()
        .map(|&seed| {
            let (_, out) = chain_flow(config, seed, length)?;
            Ok((seed, site_profiles(config, &out.circuit()?)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let c_max = config.tails.c_max;
    let mut rows = Vec::new();
    let mut violations = Vec::new();
    let mut unconverged = 0usize;
    for (seed, profiles) in &per_seed {
        for c in 0..=c_max {
            let delta = profiles.iter().map(|(_, p)| p.delta[c]).fold(0.0, f64::max);
            let upper = profiles.iter().map(|(_, p)| p.upper[c]).fold(0.0, f64::max);
            unconverged += profiles.iter().filter(|(_, p)| !p.converged[c]).count();
            for (i, p) in profiles {
                if p.delta[c] > p.upper[c] + SLACK {
                    violations.push(json!({ "seed": seed, "site": i, "c": c, "delta": p.delta[c], "upper": p.upper[c] }));
                }
            }
            rows.push((*seed, c, delta, upper));
        }
    }
    let means = mean_by_collar(&rows, c_max);
    let x: Vec<f64> = (0..=c_max).map(|c| c as f64).collect();
    let checks = vec![Check::new("tails below certified upper bound", violations.is_empty(), &violations)?];
    let summary = json!({
        "L": length,
        "gamma": config.chain.gamma,
        "bound": "certified upper bound 2 |X|_1 sum of dropped generator norms",
        "mean_delta": means,
        "fit": fit_json(fit_series(&x, &means, FitModel::Exponential, BOOTSTRAP_SEED)),
        "unconverged_lanczos": unconverged,
    });
    Ok(outcome(Some(tails_table(&rows)?), summary, checks))
}

fn family_params(config: &ExperimentConfig, seed: u64, length: usize) -> FamilyParams {
    let f = &config.family;
    FamilyParams {
        max_region_sites: f.max_region_sites,
        require_contracting: f.require_contracting,
        forced_regions: f.forced_regions.clone(),
        ..FamilyParams::new(f.chi, f.c_prime, f.epsilon, f.k_max, length, seed)
    }
}

fn family_tails(config: &ExperimentConfig) -> Result<Outcome> {
    let length = config.chain.length;
    let alpha = family_params(config, 0, length).alpha();
    let per_seed = config
        .seeds()
        .par_iter()
        .map(|&seed| {
            let sc = sample_circuit(&family_params(config, seed, length))?;
            Ok((seed, site_profiles(config, &sc.circuit)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let c_max = config.tails.c_max;
    let mut rows = Vec::new();
    let mut violations = Vec::new();
    let mut certified = true;
    let mut unconverged = 0usize;
    for (seed, profiles) in &per_seed {
        for c in 0..=c_max {
            let bound = collar_bound(alpha, 1, c, 1.0);
            let delta = profiles.iter().map(|(_, p)| p.delta[c]).fold(0.0, f64::max);
            unconverged += profiles.iter().filter(|(_, p)| !p.converged[c]).count();
            for (i, p) in profiles {
                if p.delta[c] > bound + SLACK {
                    violations.push(json!({ "seed": seed, "site": i, "c": c, "delta": p.delta[c], "bound": bound }));
                }
                certified &= p.upper[c] <= bound + SLACK;
            }
            rows.push((*seed, c, delta, bound));
        }
    }
    let means = mean_by_collar(&rows, c_max);
    let x: Vec<f64> = (0..=c_max).map(|c| c as f64).collect();
    let fit = fit_series(&x, &means, FitModel::Exponential, BOOTSTRAP_SEED);
    let rate_below = fit.as_ref().ok().map(|f| f.slope <= alpha.ln());
    let checks = vec![Check::new("collar bound holds for every site and collar", violations.is_empty(), &violations)?];
    let summary = json!({
        "L": length,
        "alpha": alpha,
        "ln_alpha": alpha.ln(),
        "vacuous": alpha >= 1.0,
        "bound_certified_by_upper": certified,
        "mean_delta": means,
        "fit": fit_json(fit),
        "rate_at_most_ln_alpha": rate_below,
        "unconverged_lanczos": unconverged,
    });
    Ok(outcome(Some(tails_table(&rows)?), summary, checks))
}

fn all_cuts(config: &ExperimentConfig, n: usize) -> Result<Vec<usize>> {
    if config.entropy.cuts.is_empty() {
        return Ok((1..n).collect());
    }
    if let Some(&c) = config.entropy.cuts.iter().find(|&&c| c == 0 || c >= n) {
        return Err(Error::Config {
            field: "entropy.cuts".into(),
            reason: format!("cut {c} is not inside a chain of {n}"),
        });
    }
    Ok(config.entropy.cuts.clone())
}

/// `states` evenly spaced basis labels, or all of them.
fn state_labels(states: usize, dim: usize) -> Vec<usize> {
    if states == 0 || states >= dim {
        (0..dim).collect()
    } else {
        (0..states).map(|j| j * dim / states).collect()
    }
}

fn entropy(config: &ExperimentConfig) -> Result<Outcome> {
    let seeds = config.seeds();
    let mut cells = Vec::new();
    for length in config.lengths() {
        let cuts = all_cuts(config, length)?;
        let scans = seeds
            .par_iter()
            .map(|&seed| {
                let dim = 1usize << length;
                let samples = match config.entropy.source {
                    EntropySource::Exact => {
                        let h = build_hamiltonian(&sample_disorder(seed, length, config.chain.gamma)?)?;
                        let spec = Spectrum::new(&h, config.dense_limit)?;
                        let stride = if config.entropy.states == 0 { 1 } else { (dim / config.entropy.states).max(1) };
                        spectrum_entropies(&spec, seed, stride, &cuts)?
                    }
                    EntropySource::Flow => {
                        let (_, out) = chain_flow(config, seed, length)?;
                        circuit_entropies(&out.circuit()?, seed, &state_labels(config.entropy.states, dim), &cuts)?
                    }
                    EntropySource::Family => {
                        let sc = sample_circuit(&family_params(config, seed, length))?;
                        circuit_entropies(&sc.circuit, seed, &state_labels(config.entropy.states, dim), &cuts)?
                    }
                };
                EntropyScan::new(length, samples)
            })
            .collect::<Result<Vec<_>>>()?;
        cells.push((length, cuts, scans));
    }
    let mut table = Table::new(schema::ENTROPY);
    let mut per_length = Vec::new();
    for (length, cuts, scans) in &cells {
        let mut by_cut = Vec::new();
        for &cut in cuts {
            let mut values = Vec::new();
            for (seed, scan) in seeds.iter().zip(scans) {
                let s: Vec<f64> = scan.samples.iter().filter(|x| x.cut == cut).map(|x| x.entropy).collect();
                let mean = s.iter().sum::<f64>() / s.len().max(1) as f64;
                table.push(vec![(*seed).into(), (*length).into(), cut.into(), mean.into()])?;
                values.extend(s);
            }
            let mean = values.iter().sum::<f64>() / values.len().max(1) as f64;
            let max = values.iter().copied().fold(0.0, f64::max);
            let cap = std::f64::consts::LN_2 * cut.min(length - cut) as f64;
            by_cut.push(json!({ "cut": cut, "mean": mean, "max": max, "cap": cap, "samples": values.len() }));
        }
        per_length.push(json!({
            "L": length,
            "volume_law": 0.5 * *length as f64 * std::f64::consts::LN_2,
            "cuts": by_cut,
        }));
    }
    let summary = json!({
        "source": config.entropy.source,
        "gamma": config.chain.gamma,
        "forced_regions": config.family.forced_regions,
        "lengths": per_length,
    });
    Ok(outcome(Some(table), summary, Vec::new()))
}

/// Largest `|x_d|` over seeds for each `d`.
fn envelope(per_seed: &[&Vec<f64>]) -> Vec<f64> {
    let n = per_seed.first().map_or(0, |v| v.len());
    (0..n).map(|d| per_seed.iter().map(|v| v[d]).fold(0.0, f64::max)).collect()
}

/// Exponential rate of `env[d-1]` over `d ≥ 2`.
fn envelope_rate(env: &[f64]) -> Result<SeriesFit> {
    let x: Vec<f64> = (2..=env.len()).map(|d| d as f64).collect();
    fit_series(&x, &env[1..], FitModel::Exponential, BOOTSTRAP_SEED)
}

fn jscaling(config: &ExperimentConfig) -> Result<Outcome> {
    let length = config.chain.length;
    if length < 5 {
        return Err(Error::Config {
            field: "chain.L".into(),
            reason: "the d >= 2 fit needs at least 5 sites".into(),
        });
    }
    let runs = config
        .seeds()
        .par_iter()
        .map(|&seed| {
            let (_, out) = chain_flow(config, seed, length)?;
            let max_j = max_coupling_by_range(&extract_js(&out.h_diag)?, length);
            let resonance_free = out.steps.iter().all(|s| s.regions.is_empty());
            let tail = if config.jscaling.tail_check && resonance_free {
                let mid = length / 2;
                let opts = tail_options(config);
                let p = tail_profile(&sz(length, mid), &out.circuit()?, SupportInterval::site(mid), &opts)?;
                Some(p.fit().map(|f| f.rate.exp()))
            } else {
                None
            };
            Ok((seed, max_j, resonance_free, tail))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut table = Table::new(schema::JSCALING);
    for (seed, max_j, _, _) in &runs {
        for (i, &v) in max_j.iter().enumerate() {
            table.push(vec![(*seed).into(), (i + 1).into(), v.into()])?;
        }
    }
    let all: Vec<&Vec<f64>> = runs.iter().map(|r| &r.1).collect();
    let env = envelope(&all);
    let monotone = env[1..].windows(2).all(|w| w[1] <= w[0]);
    let fit = envelope_rate(&env);
    let boot = bootstrap_ci(&all, BOOTSTRAP_RESAMPLES, BOOTSTRAP_SEED, |pick| {
        let picked: Vec<&Vec<f64>> = pick.iter().map(|v| **v).collect();
        Ok(envelope_rate(&envelope(&picked))?.slope)
    });
    let rate_negative = match (&fit, &boot) {
        (Ok(f), Ok(ci)) => f.slope < 0.0 && ci.1 < 0.0,
        _ => false,
    };
    let mut tail_checks = Vec::new();
    for (seed, max_j, resonance_free, tail) in &runs {
        let Some(tail) = tail else {
            continue;
        };
        let entry = match tail {
            Ok(alpha_hat) => {
                let ratios: Vec<f64> = max_j
                    .iter()
                    .enumerate()
                    .map(|(i, &j)| j / (12.0 * alpha_hat.powi(i as i32 + 1)))
                    .collect();
                let worst = ratios.iter().copied().fold(0.0, f64::max);
                let beyond = ratios.iter().skip(2).copied().fold(0.0, f64::max);
                json!({
                    "seed": seed,
                    "alpha_hat": alpha_hat,
                    "ratio_by_d": ratios,
                    "holds": worst <= 1.0,
                    "holds_beyond_2": beyond <= 1.0,
                })
            }
            Err(e) => json!({ "seed": seed, "resonance_free": resonance_free, "degenerate": e.to_string() }),
        };
        tail_checks.push(entry);
    }
    let summary = json!({
        "L": length,
        "gamma": config.chain.gamma,
        "envelope": env,
        "monotone_beyond_2": monotone,
        "fit": fit_json(fit),
        "seed_bootstrap_ci": boot.as_ref().ok(),
        "rate_negative": rate_negative,
        "resonance_free_seeds": runs.iter().filter(|r| r.2).map(|r| r.0).collect::<Vec<_>>(),
        "tail_comparison": tail_checks,
    });
    Ok(outcome(Some(table), summary, Vec::new()))
}

fn lrb(config: &ExperimentConfig) -> Result<Outcome> {
    let length = config.chain.length;
    let times = log_times(config.lrb.t_min, config.lrb.t_max, config.lrb.n_times);
    let opts = LrbOptions {
        threshold: config.lrb.threshold,
        lanczos: LanczosOptions {
            max_iterations: config.lrb.lanczos_max_iterations,
            tolerance: config.lrb.lanczos_tolerance,
            ..LrbOptions::default().lanczos
        },
    };
    let a = sx(length, 0);
    let bs: Vec<(usize, OperatorSum)> = (1..length).map(|d| (d, sx(length, d))).collect();
    let grids = config
        .seeds()
        .par_iter()
        .map(|&seed| {
            let h = build_hamiltonian(&sample_disorder(seed, length, config.chain.gamma)?)?;
            let spec = Spectrum::new(&h, config.dense_limit)?;
            Ok((seed, lrb_commutator(&spec, &a, &bs, &times, &opts)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut table = Table::new(schema::LRB);
    for (seed, g) in &grids {
        for (ti, &t) in g.times.iter().enumerate() {
            for (di, &d) in g.distances.iter().enumerate() {
                table.push(vec![(*seed).into(), t.into(), d.into(), g.values[ti][di].into()])?;
            }
        }
    }
    let plain: Vec<LightconeGrid> = grids.into_iter().map(|(_, g)| g).collect();
    let avg = LightconeGrid::average(&plain)?;
    let fits = avg.front_fits();
    let summary = json!({
        "L": length,
        "gamma": config.chain.gamma,
        "threshold": config.lrb.threshold,
        "front": avg.front(),
        "fits": fits.as_ref().ok(),
        "degenerate": fits.as_ref().err().map(|e| e.to_string()),
        "log_r2_exceeds_linear": fits.as_ref().ok().map(|f| f.log.r2 > f.linear.r2),
        "converged": plain.iter().all(|g| g.converged),
    });
    Ok(outcome(Some(table), summary, Vec::new()))
}

fn timeavg(config: &ExperimentConfig) -> Result<Outcome> {
    let length = config.chain.length;
    let tc = &config.timeavg;
    let cells: Vec<(u64, f64)> = config
        .seeds()
        .into_iter()
        .flat_map(|s| tc.times.iter().map(move |&t| (s, t)))
        .collect();
    let reports = cells
        .par_iter()
        .map(|&(seed, t)| {
            let h = build_hamiltonian(&sample_disorder(seed, length, config.chain.gamma)?)?;
            Ok((seed, t, patch_commutators(&h, tc.patch_size, t, tc.collar, config.dense_limit)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut table = Table::new(schema::TIMEAVG);
    let mut violations = Vec::new();
    let mut worst_ratio = 0.0f64;
    let mut max_delta = 0.0f64;
    for (seed, t, patches) in &reports {
        for p in patches {
            table.push(vec![(*seed).into(), (*t).into(), p.patch.into(), p.residual.into(), p.bound.into()])?;
            if p.residual > p.bound + SLACK {
                violations.push(json!({ "seed": seed, "T": t, "patch": p.patch, "residual": p.residual, "bound": p.bound }));
            }
            if p.bound > 0.0 {
                worst_ratio = worst_ratio.max(p.residual / p.bound);
            }
            max_delta = max_delta.max(p.delta_norm.unwrap_or(0.0));
        }
    }
    let checks = vec![Check::new("commutator residual within 2|x|/T", violations.is_empty(), &violations)?];
    let summary = json!({
        "L": length,
        "gamma": config.chain.gamma,
        "cases": reports.len(),
        "patch_checks": table.rows.len(),
        "max_residual_over_bound": worst_ratio,
        "max_collar_difference": max_delta,
    });
    Ok(outcome(Some(table), summary, checks))
}

fn scheme(name: SchemeName) -> TrotterScheme {
    match name {
        SchemeName::Bond => TrotterScheme::BOND,
        SchemeName::Paired => TrotterScheme::PAIRED,
        SchemeName::Triple => TrotterScheme::TRIPLE,
    }
}

/// Log-log slope of `error` against column `x` at fixed `key`.
fn loglog_slopes(table: &Table, x: usize, key: usize) -> Vec<serde_json::Value> {
    let mut keys: Vec<f64> = table.rows.iter().map(|r| r[key].as_f64()).collect();
    keys.sort_by(f64::total_cmp);
    keys.dedup();
    keys.into_iter()
        .map(|k| {
            let (xs, ys): (Vec<f64>, Vec<f64>) = table
                .rows
                .iter()
                .filter(|r| r[key].as_f64() == k && r[2].as_f64() > 0.0)
                .map(|r| (r[x].as_f64().ln(), r[2].as_f64().ln()))
                .unzip();
            json!({ table.header[key]: k, "fit": fit_json(fit_series(&xs, &ys, FitModel::Linear, BOOTSTRAP_SEED)) })
        })
        .collect()
}

fn trotter(config: &ExperimentConfig) -> Result<Outcome> {
    let length = config.chain.length;
    let tc = &config.trotter;
    let sch = scheme(tc.scheme);
    let seeds = &config.seeds();
    let cells: Vec<(usize, f64, u64)> = tc
        .steps
        .iter()
        .flat_map(|&n| tc.gate_norms.iter().flat_map(move |&g| seeds.iter().map(move |&s| (n, g, s))))
        .collect();
    let errors = cells
        .par_iter()
        .map(|&(n, g, seed)| {
            let a = random_bond_generator(length, g, seed)?;
            let (error, cone) = match tc.mode {
                TrotterMode::Unitary => (trotter_error(&a, n, sch, config.dense_limit)?, 0.0),
                TrotterMode::Conjugation => {
                    let c = build_trotter(&a, n, sch)?.min_collar();
                    let e = conjugation_error(&sz(length, length / 2), &a, n, c, sch, config.dense_limit)?;
                    (e.error, e.cone_difference)
                }
            };
            Ok((n, g, error, cone))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut table = Table::new(schema::TROTTER);
    let mut max_cone = 0.0f64;
    for &n in &tc.steps {
        for &g in &tc.gate_norms {
            let worst = errors
                .iter()
                .filter(|e| e.0 == n && e.1 == g)
                .map(|e| e.2)
                .fold(0.0, f64::max);
            table.push(vec![n.into(), g.into(), worst.into()])?;
        }
    }
    for e in &errors {
        max_cone = max_cone.max(e.3);
    }
    table.sort();
    let summary = json!({
        "L": length,
        "mode": tc.mode,
        "scheme": tc.scheme,
        "error_vs_steps": loglog_slopes(&table, 0, 1),
        "error_vs_gate_norm": loglog_slopes(&table, 1, 0),
        "max_cone_difference": max_cone,
    });
    let checks = vec![Check::new(
        "collared circuit matches whole chain",
        max_cone < 1e-12,
        json!({ "max": max_cone }),
    )?];
    Ok(outcome(Some(table), summary, checks))
}

fn bounds() -> Result<Outcome> {
    let report = bound_report()?;
    let checks = report
        .checks
        .iter()
        .map(|c| Check::new(c.name.clone(), c.pass, json!(null)))
        .collect::<Result<Vec<_>>>()?;
    let mut bytes = serde_json::to_vec_pretty(&report)?;
    bytes.push(b'\n');
    let summary = json!({ "checks": report.checks.len(), "all_pass": report.all_pass() });
    let mut artifacts = BTreeMap::new();
    artifacts.insert("bounds_report.json".into(), bytes);
    Ok(Outcome {
        artifacts,
        ..outcome(None, summary, checks)
    })
}
