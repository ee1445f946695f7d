//! Symmetric Dirichlet prior sampler by data augmentation.
//!
//! Each sweep imputes a bin for every observation from the current weights
//! restricted to its shaded region, draws the weights from the conjugate
//! Dirichlet posterior, then updates the concentration `tau` by Metropolis.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use statrs::function::gamma::ln_gamma;

use super::{check_infos, mh_accept, propose_log_tau, ChainConfig, ChainOutput, Recorder, TauPrior};
use crate::censor::{censoring_infos, CensoringInfo, Observation, ShadedMasses};
use crate::error::{Error, Result};
use crate::grid::{BinWeights, GridSpec};
use crate::rng::stream_rng;

pub const SWEEP_ORDER: &str = "impute-then-theta-then-tau";

/// Weights are kept at least this large so imputation never meets an
/// exactly empty region; the log-weights used for `tau` stay exact.
pub const THETA_FLOOR: f64 = 1e-300;

fn impute_into<R: Rng + ?Sized>(
    masses: &ShadedMasses,
    infos: &[CensoringInfo],
    counts: &mut [u32],
    rng: &mut R,
) -> Result<()> {
    counts.iter_mut().for_each(|c| *c = 0);
    for (i, info) in infos.iter().enumerate() {
        let (u1, u2): (f64, f64) = (rng.random(), rng.random());
        let l = masses
            .sample_bin(info, u1, u2)
            .ok_or(Error::ImputationImpossible { index: i })?;
        counts[l] += 1;
    }
    Ok(())
}

/// Draws one bin per observation with probability proportional to
/// `theta_l * a_il`, returning the bin counts.
pub fn impute_bins<R: Rng + ?Sized>(
    grid: &GridSpec,
    w: &BinWeights,
    infos: &[CensoringInfo],
    rng: &mut R,
) -> Result<Vec<u32>> {
    w.check_grid(grid)?;
    for info in infos {
        info.check_grid(grid)?;
    }
    let mut masses = ShadedMasses::new(grid);
    masses.update(w.as_slice());
    let mut counts = vec![0; grid.p()];
    impute_into(&masses, infos, &mut counts, rng)?;
    Ok(counts)
}

/// `log Gamma(shape, 1)` draw, accurate when the draw itself would underflow.
fn ln_gamma_draw<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    if shape >= 1.0 {
        let g: f64 = Gamma::new(shape, 1.0).expect("positive shape").sample(rng);
        g.ln()
    } else {
        // Gamma(a) = Gamma(a + 1) * U^(1/a).
        let g: f64 = Gamma::new(shape + 1.0, 1.0).expect("positive shape").sample(rng);
        let u: f64 = rng.random();
        g.ln() + u.ln() / shape
    }
}

/// Fills `log_theta` with the log of a `Dirichlet(tau + counts)` draw and
/// `theta` with its floored exponential.
fn dirichlet_draw<R: Rng + ?Sized>(
    counts: &[u32],
    tau: f64,
    log_theta: &mut [f64],
    theta: &mut [f64],
    rng: &mut R,
) {
    let mut max = f64::NEG_INFINITY;
    for (lt, &c) in log_theta.iter_mut().zip(counts) {
        *lt = ln_gamma_draw(tau + c as f64, rng);
        max = max.max(*lt);
    }
    let sum: f64 = log_theta.iter().map(|&v| (v - max).exp()).sum();
    let log_norm = max + sum.ln();
    for (lt, t) in log_theta.iter_mut().zip(theta.iter_mut()) {
        *lt -= log_norm;
        *t = lt.exp().max(THETA_FLOOR);
    }
}

/// Draws `theta ~ Dirichlet(tau + C_1, ..., tau + C_p)`.
pub fn dirichlet_update<R: Rng + ?Sized>(counts: &[u32], tau: f64, rng: &mut R) -> Result<BinWeights> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidArgument(format!("concentration must be positive, got {tau}")));
    }
    if counts.is_empty() {
        return Err(Error::InvalidArgument("no bins".into()));
    }
    let mut log_theta = vec![0.0; counts.len()];
    let mut theta = vec![0.0; counts.len()];
    dirichlet_draw(counts, tau, &mut log_theta, &mut theta, rng);
    BinWeights::normalised(theta)
}

/// Log of the `tau`-dependent part of the target at `tau_new` over `tau`.
fn tau_log_ratio(p: usize, sum_log_theta: f64, tau: f64, tau_new: f64, prior: &TauPrior) -> f64 {
    let pf = p as f64;
    let norm = |t: f64| ln_gamma(pf * t) - pf * ln_gamma(t);
    norm(tau_new) - norm(tau) + (tau_new - tau) * sum_log_theta + prior.ln_density(tau_new)
        - prior.ln_density(tau)
        + (tau_new / tau).ln()
}

/// Log density of `Dirichlet(tau, ..., tau)` at `w`.
pub fn dirichlet_ln_density(w: &BinWeights, tau: f64) -> Result<f64> {
    let theta = w.as_slice();
    if theta.iter().any(|&v| v <= 0.0) {
        return Err(Error::Domain("Dirichlet density undefined at a zero weight".into()));
    }
    let p = theta.len() as f64;
    let s: f64 = theta.iter().map(|v| v.ln()).sum();
    Ok(ln_gamma(p * tau) - p * ln_gamma(tau) + (tau - 1.0) * s)
}

fn tau_move<R: Rng + ?Sized>(
    p: usize,
    sum_log_theta: f64,
    tau: f64,
    delta: f64,
    prior: &TauPrior,
    rng: &mut R,
) -> (f64, bool) {
    let Some(tau_new) = propose_log_tau(tau, delta, rng) else {
        return (tau, false);
    };
    if mh_accept(tau_log_ratio(p, sum_log_theta, tau, tau_new, prior), rng) {
        (tau_new, true)
    } else {
        (tau, false)
    }
}

/// Metropolis update of the concentration given the weights.
pub fn tau_step_dirichlet<R: Rng + ?Sized>(
    w: &BinWeights,
    tau: f64,
    cfg: &ChainConfig,
    rng: &mut R,
) -> Result<(f64, bool)> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidArgument(format!("concentration must be positive, got {tau}")));
    }
    let theta = w.as_slice();
    if theta.iter().any(|&v| v <= 0.0) {
        return Err(Error::Domain("Dirichlet density undefined at a zero weight".into()));
    }
    let s: f64 = theta.iter().map(|v| v.ln()).sum();
    Ok(tau_move(theta.len(), s, tau, cfg.delta, &cfg.tau_prior, rng))
}

/// State of one Dirichlet chain.
#[derive(Clone, Debug)]
pub struct DirichletChain<'a> {
    infos: &'a [CensoringInfo],
    theta: Vec<f64>,
    log_theta: Vec<f64>,
    tau: f64,
    counts: Vec<u32>,
    masses: ShadedMasses,
    pub delta: f64,
    pub tau_prior: TauPrior,
}

impl<'a> DirichletChain<'a> {
    /// Starts at uniform weights and `tau = 1`.
    pub fn new(grid: &GridSpec, infos: &'a [CensoringInfo], delta: f64, tau_prior: TauPrior) -> Result<Self> {
        check_infos(grid, infos)?;
        let p = grid.p();
        Ok(Self {
            infos,
            theta: vec![1.0 / p as f64; p],
            log_theta: vec![-(p as f64).ln(); p],
            tau: 1.0,
            counts: vec![0; p],
            masses: ShadedMasses::new(grid),
            delta,
            tau_prior,
        })
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    /// Imputation and weight draw; the weight update is Gibbs.
    pub fn theta_move<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        if !self.infos.is_empty() {
            self.masses.update(&self.theta);
            impute_into(&self.masses, self.infos, &mut self.counts, rng)?;
        }
        dirichlet_draw(&self.counts, self.tau, &mut self.log_theta, &mut self.theta, rng);
        Ok(())
    }

    pub fn tau_move<R: Rng + ?Sized>(&mut self, rng: &mut R) -> bool {
        let s: f64 = self.log_theta.iter().sum();
        let (tau, accepted) = tau_move(self.theta.len(), s, self.tau, self.delta, &self.tau_prior, rng);
        self.tau = tau;
        accepted
    }
}

/// Full Dirichlet-prior run.
pub fn run_dirichlet_chain(cfg: &ChainConfig, grid: &GridSpec, data: &[Observation]) -> Result<ChainOutput> {
    cfg.validate()?;
    let infos = censoring_infos(grid, data)?;
    run_dirichlet_chain_with(cfg, grid, &infos)
}

/// Full Dirichlet-prior run on precomputed censoring infos.
pub fn run_dirichlet_chain_with(
    cfg: &ChainConfig,
    grid: &GridSpec,
    infos: &[CensoringInfo],
) -> Result<ChainOutput> {
    cfg.validate()?;
    let mut rng = stream_rng(cfg.seed, cfg.chain_id);
    let mut chain = DirichletChain::new(grid, infos, cfg.delta, cfg.tau_prior)?;
    let mut rec = Recorder::new(cfg, grid.p());
    let mut acc_tau = 0usize;
    for sweep in 0..cfg.iterations {
        chain.theta_move(&mut rng)?;
        acc_tau += chain.tau_move(&mut rng) as usize;
        rec.record(sweep, &chain.theta, chain.tau, None);
    }
    rec.finish(1.0, acc_tau as f64 / cfg.iterations as f64, SWEEP_ORDER)
}
