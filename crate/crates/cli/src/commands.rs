use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use csmark::io::{
    read_observations, read_truth, read_weight_table, read_weights, write_observations, write_trace, write_truth,
    write_weights,
};
use csmark::laplacian::GridLaplacian;
use csmark::rng::derive_seed;
use csmark::samplers::{
    run_dirichlet_chain, run_lngl_chain_with, tune_dirichlet, tune_lngl, ChainConfig, ChainOutput, TauPrior,
    TuneOptions, TuneResult,
};
use csmark::sim::{f0_density, simulate_dataset, simulate_with_truth, SimSpec, SUPPORT_M1, SUPPORT_M2};
use csmark::{true_bin_masses, wasserstein1, BinWeights, GridSpec, Observation, Units};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::args::{
    ChainArgs, Command, EvaluateArgs, FitArgs, GridArgs, HeatmapArgs, McArgs, PriorArg, ReplayArgs, SimulateArgs,
};
use crate::error::CliError;
use crate::manifest::{write_json, Acceptance, RunManifest};

type Result<T> = std::result::Result<T, CliError>;

pub fn run(cmd: &Command) -> Result<()> {
    match cmd {
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Mc(a) => mc(a),
        Command::Heatmap(a) => heatmap(a),
        Command::Replay(a) => replay(a),
    }
}

fn prepare_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn grid_of(g: &GridArgs) -> Result<GridSpec> {
    Ok(GridSpec::new(g.m1, g.m2, g.bins_x, g.bins_y)?)
}

fn chain_config(c: &ChainArgs, seed: u64) -> ChainConfig {
    ChainConfig {
        iterations: c.iters,
        burnin_fraction: c.burnin_frac,
        rho: c.rho,
        delta: c.delta,
        tau_prior: TauPrior::Exponential { rate: c.tau_rate },
        seed,
        chain_id: 0,
        thin: c.thin,
        keep_draws: false,
    }
}

fn tune(prior: PriorArg, base: &ChainConfig, lap: &GridLaplacian, data: &[Observation]) -> Result<TuneResult> {
    let opts = TuneOptions::default();
    Ok(match prior {
        PriorArg::Lngl => tune_lngl(base, lap, data, &opts)?,
        PriorArg::Dirichlet => tune_dirichlet(base, lap.grid(), data, &opts)?,
    })
}

fn run_chain(prior: PriorArg, cfg: &ChainConfig, lap: &GridLaplacian, data: &[Observation]) -> Result<ChainOutput> {
    Ok(match prior {
        PriorArg::Lngl => run_lngl_chain_with(cfg, lap, data)?,
        PriorArg::Dirichlet => run_dirichlet_chain(cfg, lap.grid(), data)?,
    })
}

/// Analytic bin masses of the simulation density; only defined on its own
/// support.
fn analytic_truth(grid: &GridSpec) -> Result<BinWeights> {
    if grid.m1() != SUPPORT_M1 || grid.m2() != SUPPORT_M2 {
        return Err(CliError::new(
            "invalid-argument",
            format!("analytic truth lives on [0, {SUPPORT_M1}] x [0, {SUPPORT_M2}]; got m1={}, m2={}", grid.m1(), grid.m2()),
        ));
    }
    Ok(true_bin_masses(grid, |x, y| f0_density(x, y).expect("inside support"))?)
}

fn simulate(a: &SimulateArgs) -> Result<()> {
    let start = Instant::now();
    prepare_dir(&a.out_dir)?;
    let spec = SimSpec { n: a.n, seed: a.seed, mix_weight: a.mix_weight };
    let (obs, truth) = simulate_with_truth(&spec)?;
    let mut m = RunManifest::new(Command::Simulate(a.clone()), Some(a.seed));
    write_observations(&a.out_dir.join("data.csv"), &obs)?;
    m.artifacts.push("data.csv".into());
    if a.truth {
        write_truth(&a.out_dir.join("truth.csv"), &truth)?;
        m.artifacts.push("truth.csv".into());
    }
    let censored = obs.iter().filter(|o| !o.has_mark()).count();
    m.details = json!({ "n": a.n, "censored_without_mark": censored });
    m.wall_time_secs = start.elapsed().as_secs_f64();
    m.artifacts.push("manifest.json".into());
    write_json(&a.out_dir.join("manifest.json"), &m)
}

fn fit(a: &FitArgs) -> Result<()> {
    let start = Instant::now();
    let data = read_observations(&a.data)?;
    let grid = grid_of(&a.grid)?;
    let lap = GridLaplacian::new(&grid)?;
    let mut cfg = chain_config(&a.chain, a.seed);
    cfg.validate()?;
    let tuned = if a.chain.tune {
        let r = tune(a.prior, &cfg, &lap, &data)?;
        cfg.rho = r.rho;
        cfg.delta = r.delta;
        Some(r)
    } else {
        None
    };
    let out = run_chain(a.prior, &cfg, &lap, &data)?;
    prepare_dir(&a.out_dir)?;
    write_weights(&a.out_dir.join("posterior_mean.csv"), &grid, &out.posterior_mean)?;
    write_trace(&a.out_dir.join("tau_trace.csv"), &out.tau_trace)?;
    let mut artifacts = vec!["posterior_mean.csv".to_string(), "tau_trace.csv".to_string()];
    if !out.level_trace.is_empty() {
        write_trace(&a.out_dir.join("level_trace.csv"), &out.level_trace)?;
        artifacts.push("level_trace.csv".into());
    }
    artifacts.push("meta.json".into());
    let mut m = RunManifest::new(Command::Fit(a.clone()), Some(a.seed));
    m.artifacts = artifacts;
    m.acceptance = Some(Acceptance { accept_z: out.accept_z, accept_tau: out.accept_tau });
    m.details = json!({
        "prior": a.prior.name(),
        "n": data.len(),
        "sweep_order": out.sweep_order,
        "recorded_draws": cfg.recorded(),
        "burnin_draws": cfg.burnin_draws(),
        "rho": cfg.rho,
        "delta": cfg.delta,
        "tuning": tuned,
    });
    m.wall_time_secs = start.elapsed().as_secs_f64();
    write_json(&a.out_dir.join("meta.json"), &m)
}

#[derive(Serialize)]
struct GridReport {
    bins_x: usize,
    bins_y: usize,
    m1: f64,
    m2: f64,
}

#[derive(Serialize)]
struct EvalInputs {
    estimate: PathBuf,
    truth: String,
}

#[derive(Serialize)]
struct EvalReport {
    wasserstein_physical: f64,
    wasserstein_index: f64,
    grid: GridReport,
    inputs: EvalInputs,
}

fn histogram(grid: &GridSpec, points: impl Iterator<Item = (f64, f64)>) -> Result<BinWeights> {
    let mut counts = vec![0.0; grid.p()];
    for (x, y) in points {
        counts[grid.bin_of(x, y)?] += 1.0;
    }
    Ok(BinWeights::normalised(counts)?)
}

fn evaluate(a: &EvaluateArgs) -> Result<()> {
    let start = Instant::now();
    let (j, k, values) = read_weight_table(&a.estimate)?;
    let grid = GridSpec::new(a.m1, a.m2, j, k)?;
    let estimate = BinWeights::new(values)?;
    let (truth, label) = match (&a.truth_weights, &a.truth_sample) {
        (Some(p), _) => (read_weights(p, &grid)?, p.display().to_string()),
        (None, Some(p)) => {
            let recs = read_truth(p)?;
            (histogram(&grid, recs.iter().map(|r| (r.x, r.y)))?, p.display().to_string())
        }
        (None, None) => (analytic_truth(&grid)?, "analytic".to_string()),
    };
    let report = EvalReport {
        wasserstein_physical: wasserstein1(&grid, &estimate, &truth, Units::Physical)?,
        wasserstein_index: wasserstein1(&grid, &estimate, &truth, Units::Index)?,
        grid: GridReport { bins_x: j, bins_y: k, m1: a.m1, m2: a.m2 },
        inputs: EvalInputs { estimate: a.estimate.clone(), truth: label },
    };
    prepare_dir(&a.out_dir)?;
    write_json(&a.out_dir.join("report.json"), &report)?;
    let mut m = RunManifest::new(Command::Evaluate(a.clone()), None);
    m.artifacts = vec!["report.json".into(), "manifest.json".into()];
    m.details = json!({
        "wasserstein_physical": report.wasserstein_physical,
        "wasserstein_index": report.wasserstein_index,
    });
    m.wall_time_secs = start.elapsed().as_secs_f64();
    write_json(&a.out_dir.join("manifest.json"), &m)
}

struct McRow {
    rep: usize,
    n: usize,
    prior: PriorArg,
    seed: u64,
    chain_seed: u64,
    result: std::result::Result<f64, String>,
}

#[derive(Serialize)]
struct McCell {
    n: usize,
    prior: &'static str,
    rho: f64,
    delta: f64,
    reps_ok: usize,
    reps_failed: usize,
    mean_wasserstein: Option<f64>,
    sd_wasserstein: Option<f64>,
}

fn prior_code(p: PriorArg) -> u64 {
    match p {
        PriorArg::Lngl => 1,
        PriorArg::Dirichlet => 2,
    }
}

fn mc(a: &McArgs) -> Result<()> {
    let start = Instant::now();
    if a.n_list.is_empty() || a.priors.is_empty() {
        return Err(CliError::usage("need at least one sample size and one prior"));
    }
    let grid = grid_of(&a.grid)?;
    let lap = GridLaplacian::new(&grid)?;
    let truth = analytic_truth(&grid)?;
    let base = chain_config(&a.chain, a.seed);
    base.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.threads)
        .build()
        .map_err(|e| CliError::new("invalid-argument", e.to_string()))?;

    // Step sizes per (n, prior) cell, tuned once on a pilot dataset.
    let mut cells: Vec<(usize, PriorArg, f64, f64)> = Vec::new();
    for &n in &a.n_list {
        for &prior in &a.priors {
            let (mut rho, mut delta) = (base.rho, base.delta);
            if a.chain.tune {
                let pilot = simulate_dataset(&SimSpec::new(n, derive_seed(a.seed, &[n as u64, u64::MAX])))?;
                let cfg = ChainConfig { seed: derive_seed(a.seed, &[n as u64, u64::MAX, prior_code(prior)]), ..base.clone() };
                let r = pool.install(|| tune(prior, &cfg, &lap, &pilot))?;
                rho = r.rho;
                delta = r.delta;
            }
            cells.push((n, prior, rho, delta));
        }
    }

    let jobs: Vec<(usize, usize, PriorArg, f64, f64)> = cells
        .iter()
        .flat_map(|&(n, prior, rho, delta)| (0..a.reps).map(move |rep| (n, rep, prior, rho, delta)))
        .collect();
    let rows: Vec<McRow> = pool.install(|| {
        jobs.par_iter()
            .map(|&(n, rep, prior, rho, delta)| {
                let seed = derive_seed(a.seed, &[n as u64, rep as u64]);
                let chain_seed = derive_seed(seed, &[prior_code(prior)]);
                let cfg = ChainConfig { seed: chain_seed, rho, delta, ..base.clone() };
                let result = simulate_dataset(&SimSpec::new(n, seed))
                    .map_err(CliError::from)
                    .and_then(|data| run_chain(prior, &cfg, &lap, &data))
                    .and_then(|out| Ok(wasserstein1(&grid, &out.posterior_mean, &truth, Units::Physical)?))
                    .map_err(|e| format!("{}: {}", e.category, e.message));
                McRow { rep, n, prior, seed, chain_seed, result }
            })
            .collect()
    });

    prepare_dir(&a.out_dir)?;
    let mut csv = String::from("rep,n,prior,seed,chain_seed,wasserstein,error\n");
    for r in &rows {
        let (w, err) = match &r.result {
            Ok(w) => (w.to_string(), String::new()),
            Err(e) => (String::new(), format!("\"{}\"", e.replace('"', "'"))),
        };
        let _ = writeln!(csv, "{},{},{},{},{},{w},{err}", r.rep, r.n, r.prior.name(), r.seed, r.chain_seed);
    }
    let results_path = a.out_dir.join("results.csv");
    std::fs::write(&results_path, csv).map_err(|e| CliError::io(&results_path, e))?;

    let summary: Vec<McCell> = cells
        .iter()
        .map(|&(n, prior, rho, delta)| {
            let ok: Vec<f64> = rows
                .iter()
                .filter(|r| r.n == n && r.prior == prior)
                .filter_map(|r| r.result.as_ref().ok().copied())
                .collect();
            let failed = a.reps - ok.len();
            let mean = (!ok.is_empty()).then(|| ok.iter().sum::<f64>() / ok.len() as f64);
            let sd = mean.filter(|_| ok.len() > 1).map(|m| {
                (ok.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (ok.len() - 1) as f64).sqrt()
            });
            McCell { n, prior: prior.name(), rho, delta, reps_ok: ok.len(), reps_failed: failed, mean_wasserstein: mean, sd_wasserstein: sd }
        })
        .collect();
    write_json(&a.out_dir.join("summary.json"), &json!({ "units": "physical", "cells": summary }))?;

    let mut m = RunManifest::new(Command::Mc(a.clone()), Some(a.seed));
    m.artifacts = vec!["results.csv".into(), "summary.json".into(), "manifest.json".into()];
    m.details = json!({ "rows": rows.len(), "failed_rows": rows.iter().filter(|r| r.result.is_err()).count() });
    m.wall_time_secs = start.elapsed().as_secs_f64();
    write_json(&a.out_dir.join("manifest.json"), &m)
}

/// P5 image bytes: one `block x block` square per bin, time to the right and
/// mark upward, intensity linear from 0 to the largest bin mass.
pub fn render_pgm(j_bins: usize, k_bins: usize, values: &[f64], block: usize) -> Vec<u8> {
    let max = values.iter().copied().fold(0.0, f64::max);
    let (w, h) = (j_bins * block, k_bins * block);
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.reserve(w * h);
    for row in 0..h {
        let k = k_bins - 1 - row / block;
        for col in 0..w {
            let v = values[k * j_bins + col / block];
            let level = if max > 0.0 { (255.0 * v / max).round() } else { 0.0 };
            out.push(level as u8);
        }
    }
    out
}

fn heatmap(a: &HeatmapArgs) -> Result<()> {
    let start = Instant::now();
    if a.block == 0 {
        return Err(CliError::usage("--block must be at least 1"));
    }
    let (j, k, values) = read_weight_table(&a.weights)?;
    BinWeights::new(values.clone())?;
    prepare_dir(&a.out_dir)?;
    let img = a.out_dir.join("heatmap.pgm");
    std::fs::write(&img, render_pgm(j, k, &values, a.block)).map_err(|e| CliError::io(&img, e))?;
    let max = values.iter().copied().fold(0.0, f64::max);
    write_json(
        &a.out_dir.join("heatmap.json"),
        &json!({
            "bins_x": j,
            "bins_y": k,
            "block": a.block,
            "scale_min": 0.0,
            "scale_max": max,
            "orientation": "columns are event-time bins left to right; rows are mark bins, lowest mark at the bottom",
        }),
    )?;
    let mut m = RunManifest::new(Command::Heatmap(a.clone()), None);
    m.artifacts = vec!["heatmap.pgm".into(), "heatmap.json".into(), "manifest.json".into()];
    m.wall_time_secs = start.elapsed().as_secs_f64();
    write_json(&a.out_dir.join("manifest.json"), &m)
}

fn replay(a: &ReplayArgs) -> Result<()> {
    let m = RunManifest::read(&a.manifest)?;
    let mut cmd = m.invocation;
    if let Some(dir) = &a.out_dir {
        match &mut cmd {
            Command::Simulate(c) => c.out_dir = dir.clone(),
            Command::Fit(c) => c.out_dir = dir.clone(),
            Command::Evaluate(c) => c.out_dir = dir.clone(),
            Command::Mc(c) => c.out_dir = dir.clone(),
            Command::Heatmap(c) => c.out_dir = dir.clone(),
            Command::Replay(_) => return Err(CliError::usage("a manifest cannot record a replay")),
        }
    }
    if matches!(cmd, Command::Replay(_)) {
        return Err(CliError::usage("a manifest cannot record a replay"));
    }
    run(&cmd)
}
