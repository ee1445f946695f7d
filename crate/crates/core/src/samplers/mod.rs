//! Posterior samplers for the bin weights.
//!
//! * [`lngl`]: logistic-normal prior with graph-Laplacian precision, sampled
//!   in whitened coordinates with preconditioned Crank-Nicolson proposals.
//! * [`dirichlet`]: symmetric Dirichlet prior, sampled by data augmentation.
//!
//! Both put a prior on the concentration/scale `tau` and update it with a
//! random-walk Metropolis step on `log tau`.

pub mod dirichlet;
pub mod lngl;
pub mod tune;

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::grid::BinWeights;

pub use dirichlet::{
    dirichlet_update, impute_bins, run_dirichlet_chain, run_dirichlet_chain_with,
    tau_step_dirichlet, DirichletChain,
};
pub use lngl::{pcn_step, run_lngl_chain, run_lngl_chain_with, tau_step_lngl, LatentState, LnglChain};
pub use tune::{tune_dirichlet, tune_lngl, TuneOptions, TuneResult};

/// Prior on the smoothing scale / concentration `tau`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum TauPrior {
    Exponential { rate: f64 },
    Gamma { shape: f64, rate: f64 },
}

impl Default for TauPrior {
    fn default() -> Self {
        TauPrior::Exponential { rate: 1.0 }
    }
}

impl TauPrior {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            TauPrior::Exponential { rate } => rate > 0.0 && rate.is_finite(),
            TauPrior::Gamma { shape, rate } => {
                shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid tau prior {self:?}")))
        }
    }

    pub fn ln_density(&self, tau: f64) -> f64 {
        if tau.is_nan() || tau <= 0.0 {
            return f64::NEG_INFINITY;
        }
        match *self {
            TauPrior::Exponential { rate } => rate.ln() - rate * tau,
            TauPrior::Gamma { shape, rate } => {
                shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * tau.ln() - rate * tau
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            TauPrior::Exponential { rate } => 1.0 / rate,
            TauPrior::Gamma { shape, rate } => shape / rate,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            TauPrior::Exponential { rate } => 1.0 / (rate * rate),
            TauPrior::Gamma { shape, rate } => shape / (rate * rate),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let (shape, rate) = match *self {
            TauPrior::Exponential { rate } => (1.0, rate),
            TauPrior::Gamma { shape, rate } => (shape, rate),
        };
        Gamma::new(shape, 1.0 / rate)
            .expect("validated prior")
            .sample(rng)
    }
}

/// Run settings shared by both samplers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub iterations: usize,
    /// Leading fraction of recorded draws dropped before averaging.
    pub burnin_fraction: f64,
    /// pCN autoregression parameter.
    pub rho: f64,
    /// Standard deviation of the random walk on `log tau`.
    pub delta: f64,
    pub tau_prior: TauPrior,
    pub seed: u64,
    /// Stream id; chains sharing a seed but not a stream are independent.
    pub chain_id: u64,
    /// Record every `thin`-th sweep.
    pub thin: usize,
    /// Keep every recorded draw in [`ChainOutput::theta_draws`]; the
    /// posterior mean is accumulated either way.
    pub keep_draws: bool,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            iterations: 20_000,
            burnin_fraction: 1.0 / 3.0,
            rho: 0.95,
            delta: 0.1,
            tau_prior: TauPrior::default(),
            seed: 0,
            chain_id: 0,
            thin: 1,
            keep_draws: false,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidArgument("iterations must be at least 1".into()));
        }
        if !(self.burnin_fraction > 0.0 && self.burnin_fraction < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "burn-in fraction {} outside (0, 1)",
                self.burnin_fraction
            )));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::InvalidArgument(format!(
                "rho {} outside [0, 1)",
                self.rho
            )));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "delta must be positive, got {}",
                self.delta
            )));
        }
        if self.thin == 0 {
            return Err(Error::InvalidArgument("thin must be at least 1".into()));
        }
        self.tau_prior.validate()
    }

    /// Number of recorded draws.
    pub fn recorded(&self) -> usize {
        self.iterations.div_ceil(self.thin)
    }

    /// Number of recorded draws discarded as burn-in.
    pub fn burnin_draws(&self) -> usize {
        burnin_count(self.recorded(), self.burnin_fraction)
    }
}

fn burnin_count(recorded: usize, fraction: f64) -> usize {
    (recorded as f64 * fraction).floor() as usize
}

/// Result of one chain.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainOutput {
    /// Recorded weight vectors (empty unless `keep_draws`).
    pub theta_draws: Vec<Vec<f32>>,
    /// `tau` at every recorded sweep.
    pub tau_trace: Vec<f64>,
    /// Mean of the latent field at every recorded sweep (LNGL only). The
    /// softmax ignores this direction, so it is a drift monitor.
    pub level_trace: Vec<f64>,
    /// Acceptance rate of the weight update; 1 for the Gibbs update of the
    /// Dirichlet sampler.
    pub accept_z: f64,
    pub accept_tau: f64,
    pub posterior_mean: BinWeights,
    pub sweep_order: &'static str,
}

/// Componentwise average of the draws after dropping the leading
/// `burnin_fraction` of them.
pub fn posterior_mean<D, T>(draws: &[D], burnin_fraction: f64) -> Result<BinWeights>
where
    D: AsRef<[T]>,
    T: Copy + Into<f64>,
{
    if !(0.0..1.0).contains(&burnin_fraction) {
        return Err(Error::InvalidArgument(format!(
            "burn-in fraction {burnin_fraction} outside [0, 1)"
        )));
    }
    let skip = burnin_count(draws.len(), burnin_fraction);
    let kept = &draws[skip..];
    let Some(first) = kept.first() else {
        return Err(Error::InvalidArgument("no draws after burn-in".into()));
    };
    let mut acc = vec![0.0f64; first.as_ref().len()];
    for d in kept {
        let d = d.as_ref();
        if d.len() != acc.len() {
            return Err(Error::InvalidArgument("draws have unequal lengths".into()));
        }
        for (a, &v) in acc.iter_mut().zip(d) {
            *a += v.into();
        }
    }
    let n = kept.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    BinWeights::normalised(acc)
}

/// Streaming counterpart of [`posterior_mean`] used inside the chains.
#[derive(Clone, Debug)]
pub(crate) struct Recorder {
    thin: usize,
    burnin: usize,
    keep_draws: bool,
    recorded: usize,
    sum: Vec<f64>,
    summed: usize,
    draws: Vec<Vec<f32>>,
    tau_trace: Vec<f64>,
    level_trace: Vec<f64>,
}

impl Recorder {
    pub(crate) fn new(cfg: &ChainConfig, p: usize) -> Self {
        Self {
            thin: cfg.thin,
            burnin: cfg.burnin_draws(),
            keep_draws: cfg.keep_draws,
            recorded: 0,
            sum: vec![0.0; p],
            summed: 0,
            draws: Vec::new(),
            tau_trace: Vec::with_capacity(cfg.recorded()),
            level_trace: Vec::new(),
        }
    }

    pub(crate) fn record(&mut self, sweep: usize, theta: &[f64], tau: f64, level: Option<f64>) {
        if !sweep.is_multiple_of(self.thin) {
            return;
        }
        if self.recorded >= self.burnin {
            for (s, &v) in self.sum.iter_mut().zip(theta) {
                *s += v;
            }
            self.summed += 1;
        }
        if self.keep_draws {
            self.draws.push(theta.iter().map(|&v| v as f32).collect());
        }
        self.tau_trace.push(tau);
        if let Some(l) = level {
            self.level_trace.push(l);
        }
        self.recorded += 1;
    }

    pub(crate) fn finish(
        self,
        accept_z: f64,
        accept_tau: f64,
        sweep_order: &'static str,
    ) -> Result<ChainOutput> {
        if self.summed == 0 {
            return Err(Error::InvalidArgument("no draws after burn-in".into()));
        }
        let n = self.summed as f64;
        let mean = BinWeights::normalised(self.sum.into_iter().map(|s| s / n).collect())?;
        Ok(ChainOutput {
            theta_draws: self.draws,
            tau_trace: self.tau_trace,
            level_trace: self.level_trace,
            accept_z,
            accept_tau,
            posterior_mean: mean,
            sweep_order,
        })
    }
}

/// Grid consistency, and no observation with an empty shaded region.
pub(crate) fn check_infos(grid: &crate::grid::GridSpec, infos: &[crate::censor::CensoringInfo]) -> Result<()> {
    for (i, info) in infos.iter().enumerate() {
        info.check_grid(grid)?;
        if info.is_empty() {
            return Err(Error::DataValidation {
                row: i,
                message: "observation is compatible with no bin (zero likelihood)".into(),
            });
        }
    }
    Ok(())
}

/// Random-walk proposal on `log tau`; `None` when it under- or overflows.
pub(crate) fn propose_log_tau<R: Rng + ?Sized>(tau: f64, delta: f64, rng: &mut R) -> Option<f64> {
    let xi: f64 = rng.sample(rand_distr::StandardNormal);
    let proposal = tau * (delta * xi).exp();
    (proposal > 0.0 && proposal.is_finite()).then_some(proposal)
}

/// Metropolis accept/reject on a log ratio. Draws a uniform only when needed.
pub(crate) fn mh_accept<R: Rng + ?Sized>(log_ratio: f64, rng: &mut R) -> bool {
    if log_ratio >= 0.0 {
        return true;
    }
    if log_ratio.is_nan() || log_ratio == f64::NEG_INFINITY {
        return false;
    }
    let u: f64 = rng.random();
    u.ln() < log_ratio
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn posterior_mean_examples() {
        let constant = vec![vec![0.25f64, 0.75]; 5];
        let m = posterior_mean(&constant, 1.0 / 3.0).unwrap();
        assert_eq!(m.as_slice(), &[0.25, 0.75]);

        let two = vec![vec![1.0f64, 0.0], vec![0.0, 1.0]];
        assert_eq!(posterior_mean(&two, 0.0).unwrap().as_slice(), &[0.5, 0.5]);

        let six: Vec<Vec<f64>> = vec![
            vec![1.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![0.0, 1.0],
            vec![0.5, 0.5],
            vec![0.5, 0.5],
        ];
        // Drops the first two: average of the last four.
        assert_eq!(posterior_mean(&six, 1.0 / 3.0).unwrap().as_slice(), &[0.25, 0.75]);

        let empty: Vec<Vec<f64>> = vec![];
        assert!(posterior_mean(&empty, 0.5).is_err());
        assert!(posterior_mean(&two, 1.0).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(ChainConfig::default().validate().is_ok());
        let bad = [
            ChainConfig { iterations: 0, ..Default::default() },
            ChainConfig { rho: 1.0, ..Default::default() },
            ChainConfig { rho: -0.1, ..Default::default() },
            ChainConfig { burnin_fraction: 0.0, ..Default::default() },
            ChainConfig { burnin_fraction: 1.0, ..Default::default() },
            ChainConfig { thin: 0, ..Default::default() },
            ChainConfig { delta: 0.0, ..Default::default() },
            ChainConfig { tau_prior: TauPrior::Exponential { rate: -1.0 }, ..Default::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn recorded_and_burnin_counts() {
        let cfg = ChainConfig { iterations: 20_000, ..Default::default() };
        assert_eq!(cfg.recorded(), 20_000);
        assert_eq!(cfg.burnin_draws(), 6666);
        let cfg = ChainConfig { iterations: 10, thin: 3, ..Default::default() };
        assert_eq!(cfg.recorded(), 4);
        assert_eq!(cfg.burnin_draws(), 1);
        let cfg = ChainConfig { iterations: 1, ..Default::default() };
        assert_eq!(cfg.burnin_draws(), 0);
    }

    #[test]
    fn exponential_prior_ratio() {
        let prior = TauPrior::default();
        let (a, b) = (0.7, 2.3);
        let r = prior.ln_density(b) - prior.ln_density(a);
        assert!((r - (a - b)).abs() < 1e-15);
        assert_eq!(prior.ln_density(0.0), f64::NEG_INFINITY);
        let g = TauPrior::Gamma { shape: 1.0, rate: 1.0 };
        assert!((g.ln_density(1.7) - prior.ln_density(1.7)).abs() < 1e-14);
    }
}
