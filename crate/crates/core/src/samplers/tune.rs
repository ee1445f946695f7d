//! Pilot-run grid search for the step sizes.
//!
//! The chosen values are fixed for the production run, so the tuning never
//! touches the chain whose draws are kept.

use serde::{Deserialize, Serialize};

use super::dirichlet::DirichletChain;
use super::lngl::{LatentState, LnglChain};
use super::ChainConfig;
use crate::censor::{censoring_infos, Observation};
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::laplacian::GridLaplacian;
use crate::rng::{derive_seed, stream_rng};

pub const DEFAULT_RHOS: [f64; 11] = [0.0, 0.5, 0.8, 0.9, 0.95, 0.97, 0.98, 0.99, 0.995, 0.998, 0.999];
pub const DEFAULT_DELTAS: [f64; 9] = [0.02, 0.05, 0.1, 0.2, 0.3, 0.5, 0.8, 1.2, 2.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuneOptions {
    pub rhos: Vec<f64>,
    pub deltas: Vec<f64>,
    /// Sweeps run with the base settings before any pilot.
    pub warmup: usize,
    /// Sweeps per pilot, each started from the warmed-up state.
    pub pilot: usize,
    pub target_low: f64,
    pub target_high: f64,
}

impl Default for TuneOptions {
    fn default() -> Self {
        Self {
            rhos: DEFAULT_RHOS.to_vec(),
            deltas: DEFAULT_DELTAS.to_vec(),
            warmup: 2000,
            pilot: 1000,
            target_low: 0.25,
            target_high: 0.5,
        }
    }
}

impl TuneOptions {
    fn validate(&self) -> Result<()> {
        if self.rhos.is_empty() || self.deltas.is_empty() || self.pilot == 0 {
            return Err(Error::InvalidArgument("empty tuning grid".into()));
        }
        if self.rhos.iter().any(|r| !(0.0..1.0).contains(r))
            || self.deltas.iter().any(|d| !(*d > 0.0 && d.is_finite()))
        {
            return Err(Error::InvalidArgument("tuning grid value out of range".into()));
        }
        if self.target_low.is_nan() || self.target_high.is_nan() || self.target_low >= self.target_high {
            return Err(Error::InvalidArgument("empty target band".into()));
        }
        Ok(())
    }

    fn miss(&self, rate: f64) -> f64 {
        (self.target_low - rate).max(0.0) + (rate - self.target_high).max(0.0)
    }

    fn score(&self, az: f64, at: f64) -> (f64, f64) {
        let mid = 0.5 * (self.target_low + self.target_high);
        (self.miss(az) + self.miss(at), (az - mid).abs() + (at - mid).abs())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub rho: f64,
    pub delta: f64,
    pub accept_z: f64,
    pub accept_tau: f64,
    /// Whether both pilot rates fell inside the target band.
    pub in_band: bool,
}

fn pick<I: IntoIterator<Item = (f64, f64, f64, f64)>>(opts: &TuneOptions, cands: I) -> TuneResult {
    let mut best: Option<((f64, f64), TuneResult)> = None;
    for (rho, delta, az, at) in cands {
        let s = opts.score(az, at);
        let better = match &best {
            None => true,
            Some((b, _)) => s.0 < b.0 || (s.0 == b.0 && s.1 < b.1),
        };
        if better {
            let in_band = opts.miss(az) == 0.0 && opts.miss(at) == 0.0;
            best = Some((s, TuneResult { rho, delta, accept_z: az, accept_tau: at, in_band }));
        }
    }
    best.expect("non-empty grid").1
}

/// Searches `(rho, delta)` for the LNGL sampler; `base` supplies the prior
/// and seed, and the warm-up settings.
pub fn tune_lngl(
    base: &ChainConfig,
    lap: &GridLaplacian,
    data: &[Observation],
    opts: &TuneOptions,
) -> Result<TuneResult> {
    base.validate()?;
    opts.validate()?;
    let infos = censoring_infos(lap.grid(), data)?;
    let seed = derive_seed(base.seed, &[0x7475_6e65, base.chain_id]);
    let mut rng = stream_rng(seed, 0);
    let mut chain = LnglChain::new(lap, &infos, LatentState::initial(lap.p()), base.rho, base.delta, base.tau_prior)?;
    for _ in 0..opts.warmup {
        chain.tau_move(&mut rng);
        chain.pcn_move(&mut rng)?;
    }
    let warm = chain.state().clone();
    let mut cands = Vec::with_capacity(opts.rhos.len() * opts.deltas.len());
    for (a, &rho) in opts.rhos.iter().enumerate() {
        for (b, &delta) in opts.deltas.iter().enumerate() {
            let mut rng = stream_rng(seed, 1 + (a * opts.deltas.len() + b) as u64);
            let mut pilot = LnglChain::new(lap, &infos, warm.clone(), rho, delta, base.tau_prior)?;
            let (mut az, mut at) = (0usize, 0usize);
            for _ in 0..opts.pilot {
                at += pilot.tau_move(&mut rng) as usize;
                az += pilot.pcn_move(&mut rng)? as usize;
            }
            let n = opts.pilot as f64;
            cands.push((rho, delta, az as f64 / n, at as f64 / n));
        }
    }
    Ok(pick(opts, cands))
}

/// Searches `delta` for the Dirichlet sampler (its weight update is Gibbs,
/// reported with acceptance 1 and left out of the score).
pub fn tune_dirichlet(
    base: &ChainConfig,
    grid: &GridSpec,
    data: &[Observation],
    opts: &TuneOptions,
) -> Result<TuneResult> {
    base.validate()?;
    opts.validate()?;
    let infos = censoring_infos(grid, data)?;
    let seed = derive_seed(base.seed, &[0x7475_6e65, base.chain_id, 1]);
    let mut rng = stream_rng(seed, 0);
    let mut chain = DirichletChain::new(grid, &infos, base.delta, base.tau_prior)?;
    for _ in 0..opts.warmup {
        chain.theta_move(&mut rng)?;
        chain.tau_move(&mut rng);
    }
    let mut cands = Vec::with_capacity(opts.deltas.len());
    for (b, &delta) in opts.deltas.iter().enumerate() {
        let mut rng = stream_rng(seed, 1 + b as u64);
        let mut pilot = chain.clone();
        pilot.delta = delta;
        let mut at = 0usize;
        for _ in 0..opts.pilot {
            pilot.theta_move(&mut rng)?;
            at += pilot.tau_move(&mut rng) as usize;
        }
        let rate = at as f64 / opts.pilot as f64;
        // The Gibbs step sits at the band centre so only `tau` is scored.
        let mid = 0.5 * (opts.target_low + opts.target_high);
        cands.push((base.rho, delta, mid, rate));
    }
    let mut r = pick(opts, cands);
    r.accept_z = 1.0;
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scoring_prefers_band_then_centre() {
        let opts = TuneOptions::default();
        let r = pick(
            &opts,
            vec![
                (0.9, 0.1, 0.1, 0.4),
                (0.95, 0.1, 0.3, 0.45),
                (0.98, 0.1, 0.37, 0.38),
                (0.99, 0.1, 0.9, 0.9),
            ],
        );
        assert_eq!((r.rho, r.delta), (0.98, 0.1));
        assert!(r.in_band);
        let r = pick(&opts, vec![(0.5, 0.1, 0.1, 0.1), (0.6, 0.1, 0.2, 0.6)]);
        assert_eq!(r.rho, 0.6);
        assert!(!r.in_band);
    }

    #[test]
    fn small_problem_tunes_into_band() {
        let g = GridSpec::new(1.0, 2.0, 5, 10).unwrap();
        let lap = GridLaplacian::new(&g).unwrap();
        let data = crate::sim::simulate_dataset(&crate::sim::SimSpec::new(200, 1)).unwrap();
        let opts = TuneOptions { warmup: 1000, pilot: 500, ..Default::default() };
        let r = tune_lngl(&ChainConfig::default(), &lap, &data, &opts).unwrap();
        assert!(r.in_band, "{r:?}");
        let d = tune_dirichlet(&ChainConfig::default(), &g, &data, &opts).unwrap();
        assert!(d.in_band, "{d:?}");
    }
}
