//! Logistic-normal graph-Laplacian (LNGL) prior sampler.
//!
//! Non-centred parameterisation: `theta = softmax(sqrt(tau) U^{-1} z)` with
//! `z ~ N(0, I)` a priori. The `z`-update is a pCN move, which leaves the
//! standard normal reference measure invariant, so its acceptance ratio is
//! the likelihood ratio alone. `tau` moves by a log-normal random walk.

use rand::Rng;
use rand_distr::StandardNormal;

use super::{check_infos, mh_accept, propose_log_tau, ChainConfig, ChainOutput, Recorder, TauPrior};
use crate::censor::{censoring_infos, CensoringInfo, Observation, ShadedMasses};
use crate::error::{Error, Result};
use crate::grid::{BinWeights, GridSpec};
use crate::laplacian::{softmax_scaled, GridLaplacian};
use crate::rng::stream_rng;

pub const SWEEP_ORDER: &str = "tau-then-z";

/// Whitened latent vector and smoothing scale.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentState {
    pub zvec: Vec<f64>,
    pub tau: f64,
}

impl LatentState {
    /// `z = 0`, `tau = 1`: uniform weights.
    pub fn initial(p: usize) -> Self {
        Self { zvec: vec![0.0; p], tau: 1.0 }
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if self.zvec.len() != p {
            return Err(Error::InvalidArgument(format!(
                "latent vector has length {}, expected {p}",
                self.zvec.len()
            )));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidArgument(format!("tau must be positive, got {}", self.tau)));
        }
        if self.zvec.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("latent vector has non-finite entries".into()));
        }
        Ok(())
    }
}

/// One LNGL chain's mutable state plus caches.
///
/// Keeps `U^{-1} z` so the `tau`-move needs no triangular solve, and the
/// current log-likelihood so each move evaluates only its proposal.
#[derive(Clone, Debug)]
pub struct LnglChain<'a> {
    lap: &'a GridLaplacian,
    infos: &'a [CensoringInfo],
    state: LatentState,
    h_base: Vec<f64>,
    theta: Vec<f64>,
    loglik: f64,
    masses: ShadedMasses,
    z_prop: Vec<f64>,
    h_prop: Vec<f64>,
    theta_prop: Vec<f64>,
    pub rho: f64,
    pub delta: f64,
    pub tau_prior: TauPrior,
}

impl<'a> LnglChain<'a> {
    pub fn new(
        lap: &'a GridLaplacian,
        infos: &'a [CensoringInfo],
        state: LatentState,
        rho: f64,
        delta: f64,
        tau_prior: TauPrior,
    ) -> Result<Self> {
        let p = lap.p();
        state.validate(p)?;
        let grid = lap.grid();
        check_infos(grid, infos)?;
        let mut chain = Self {
            lap,
            infos,
            h_base: vec![0.0; p],
            theta: vec![0.0; p],
            loglik: 0.0,
            masses: ShadedMasses::new(grid),
            z_prop: vec![0.0; p],
            h_prop: vec![0.0; p],
            theta_prop: vec![0.0; p],
            state,
            rho,
            delta,
            tau_prior,
        };
        lap.whiten(&chain.state.zvec, &mut chain.h_base)?;
        softmax_scaled(&chain.h_base, chain.state.tau.sqrt(), &mut chain.theta);
        chain.loglik = chain.eval(&chain.theta.clone());
        if chain.loglik == f64::NEG_INFINITY {
            return Err(Error::Domain(
                "initial state gives zero likelihood to some observation".into(),
            ));
        }
        Ok(chain)
    }

    fn eval(&mut self, theta: &[f64]) -> f64 {
        if self.infos.is_empty() {
            return 0.0;
        }
        self.masses.update(theta);
        self.masses.loglik(self.infos)
    }

    pub fn state(&self) -> &LatentState {
        &self.state
    }

    pub fn into_state(self) -> LatentState {
        self.state
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn loglik(&self) -> f64 {
        self.loglik
    }

    /// Mean of the log-weights before the softmax shift; the softmax is
    /// blind to it.
    pub fn level(&self) -> f64 {
        let s = self.state.tau.sqrt();
        self.h_base.iter().sum::<f64>() * s / self.h_base.len() as f64
    }

    /// pCN move on `z`. Only the likelihood enters the acceptance ratio.
    pub fn pcn_move<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<bool> {
        let a = self.rho;
        let b = (1.0 - a * a).max(0.0).sqrt();
        for (zp, &z) in self.z_prop.iter_mut().zip(&self.state.zvec) {
            let w: f64 = rng.sample(StandardNormal);
            *zp = a * z + b * w;
        }
        self.lap.whiten(&self.z_prop, &mut self.h_prop)?;
        let mut theta = std::mem::take(&mut self.theta_prop);
        softmax_scaled(&self.h_prop, self.state.tau.sqrt(), &mut theta);
        let ll = self.eval(&theta);
        self.theta_prop = theta;
        if mh_accept(ll - self.loglik, rng) {
            std::mem::swap(&mut self.state.zvec, &mut self.z_prop);
            std::mem::swap(&mut self.h_base, &mut self.h_prop);
            std::mem::swap(&mut self.theta, &mut self.theta_prop);
            self.loglik = ll;
            Ok(true)
        } else {
            Ok(false)
        }
    }

    /// Log-normal random-walk move on `tau` with `z` held fixed.
    pub fn tau_move<R: Rng + ?Sized>(&mut self, rng: &mut R) -> bool {
        let tau = self.state.tau;
        let Some(tau_new) = propose_log_tau(tau, self.delta, rng) else {
            return false;
        };
        let mut theta = std::mem::take(&mut self.theta_prop);
        softmax_scaled(&self.h_base, tau_new.sqrt(), &mut theta);
        let ll = self.eval(&theta);
        self.theta_prop = theta;
        let log_ratio = ll - self.loglik + self.tau_prior.ln_density(tau_new)
            - self.tau_prior.ln_density(tau)
            + (tau_new / tau).ln();
        if mh_accept(log_ratio, rng) {
            std::mem::swap(&mut self.theta, &mut self.theta_prop);
            self.state.tau = tau_new;
            self.loglik = ll;
            true
        } else {
            false
        }
    }
}

/// One pCN update of `state.zvec` (see [`LnglChain::pcn_move`]).
pub fn pcn_step<R: Rng + ?Sized>(
    state: LatentState,
    cfg: &ChainConfig,
    infos: &[CensoringInfo],
    lap: &GridLaplacian,
    rng: &mut R,
) -> Result<(LatentState, bool)> {
    let mut chain = LnglChain::new(lap, infos, state, cfg.rho, cfg.delta, cfg.tau_prior)?;
    let accepted = chain.pcn_move(rng)?;
    Ok((chain.into_state(), accepted))
}

/// One random-walk update of `state.tau` (see [`LnglChain::tau_move`]).
pub fn tau_step_lngl<R: Rng + ?Sized>(
    state: LatentState,
    cfg: &ChainConfig,
    infos: &[CensoringInfo],
    lap: &GridLaplacian,
    rng: &mut R,
) -> Result<(LatentState, bool)> {
    let mut chain = LnglChain::new(lap, infos, state, cfg.rho, cfg.delta, cfg.tau_prior)?;
    let accepted = chain.tau_move(rng);
    Ok((chain.into_state(), accepted))
}

/// Full LNGL run on `grid`, factoring the precision matrix first.
pub fn run_lngl_chain(cfg: &ChainConfig, grid: &GridSpec, data: &[Observation]) -> Result<ChainOutput> {
    let lap = GridLaplacian::new(grid)?;
    run_lngl_chain_with(cfg, &lap, data)
}

/// Full LNGL run reusing an already factored precision matrix.
pub fn run_lngl_chain_with(
    cfg: &ChainConfig,
    lap: &GridLaplacian,
    data: &[Observation],
) -> Result<ChainOutput> {
    cfg.validate()?;
    let infos = censoring_infos(lap.grid(), data)?;
    run_lngl_from(cfg, lap, &infos, LatentState::initial(lap.p()))
}

pub(crate) fn run_lngl_from(
    cfg: &ChainConfig,
    lap: &GridLaplacian,
    infos: &[CensoringInfo],
    start: LatentState,
) -> Result<ChainOutput> {
    let mut rng = stream_rng(cfg.seed, cfg.chain_id);
    let mut chain = LnglChain::new(lap, infos, start, cfg.rho, cfg.delta, cfg.tau_prior)?;
    let mut rec = Recorder::new(cfg, lap.p());
    let (mut acc_z, mut acc_tau) = (0usize, 0usize);
    for sweep in 0..cfg.iterations {
        acc_tau += chain.tau_move(&mut rng) as usize;
        acc_z += chain.pcn_move(&mut rng)? as usize;
        rec.record(sweep, &chain.theta, chain.state.tau, Some(chain.level()));
    }
    let n = cfg.iterations as f64;
    rec.finish(acc_z as f64 / n, acc_tau as f64 / n, SWEEP_ORDER)
}

/// Weights implied by a latent state; convenience wrapper for callers that
/// hold a [`LatentState`].
pub fn state_weights(lap: &GridLaplacian, state: &LatentState) -> Result<BinWeights> {
    lap.theta_from_latent(&state.zvec, state.tau)
}
