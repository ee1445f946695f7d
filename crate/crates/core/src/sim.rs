//! Synthetic current-status data with continuous marks.
//!
//! Events `(X, Y)` follow a two-component mixture on `[0, 1] x [0, 2]`:
//! with probability `mix_weight` they are `(U, V)`, otherwise `(1 - U, V)`,
//! where `(U, V)` has density `(3/8)(u^2 + v)`. Inspection times have density
//! `2t` on `[0, 1]`. The mark is reported only when `X <= T`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::censor::Observation;
use crate::error::{Error, Result};
use crate::rng::stream_rng;

pub const SUPPORT_M1: f64 = 1.0;
pub const SUPPORT_M2: f64 = 2.0;
pub const DEFAULT_MIX_WEIGHT: f64 = 0.3;

/// Supremum of the default mixture density, attained at `(0, 2)`.
pub const F0_SUP: f64 = 1.0125;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub n: usize,
    pub seed: u64,
    pub mix_weight: f64,
}

impl SimSpec {
    pub fn new(n: usize, seed: u64) -> Self {
        Self {
            n,
            seed,
            mix_weight: DEFAULT_MIX_WEIGHT,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.mix_weight) {
            return Err(Error::InvalidArgument(format!(
                "mixture weight {} outside [0, 1]",
                self.mix_weight
            )));
        }
        Ok(())
    }
}

fn base_density(u: f64, v: f64) -> f64 {
    0.375 * (u * u + v)
}

/// Mixture density with weight `mix_weight` on the unreflected component.
pub fn mixture_density(mix_weight: f64, x: f64, y: f64) -> Result<f64> {
    if !((0.0..=SUPPORT_M1).contains(&x) && (0.0..=SUPPORT_M2).contains(&y)) {
        return Err(Error::Domain(format!(
            "({x}, {y}) outside [0, 1] x [0, 2]"
        )));
    }
    Ok(mix_weight * base_density(x, y) + (1.0 - mix_weight) * base_density(1.0 - x, y))
}

/// The default data-generating density (mixture weight 0.3).
pub fn f0_density(x: f64, y: f64) -> Result<f64> {
    mixture_density(DEFAULT_MIX_WEIGHT, x, y)
}

/// Marginal distribution function of `U`: `(u^3 + 3u) / 4`.
pub fn marginal_cdf_u(u: f64) -> f64 {
    (u * u * u + 3.0 * u) / 4.0
}

/// Conditional distribution function of `V` given `U = u`.
pub fn conditional_cdf_v(v: f64, u: f64) -> f64 {
    (u * u * v + v * v / 2.0) / (2.0 * u * u + 2.0)
}

const ROOT_TOL: f64 = 1e-12;
const ROOT_MAX_ITER: usize = 200;

/// Inverts the marginal CDF of `U` by safeguarded Newton on `[0, 1]`.
pub fn inverse_marginal_u(q: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidArgument(format!("quantile {q} outside [0, 1]")));
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut u = q;
    for _ in 0..ROOT_MAX_ITER {
        let f = marginal_cdf_u(u) - q;
        if f.abs() <= ROOT_TOL * 1e-3 {
            return Ok(u);
        }
        if f < 0.0 {
            lo = u;
        } else {
            hi = u;
        }
        if hi - lo <= ROOT_TOL {
            return Ok(0.5 * (lo + hi));
        }
        // F'(u) = 3(u^2 + 1) / 4 >= 3/4, so the Newton step is always defined.
        let newton = u - f / (0.75 * (u * u + 1.0));
        if (newton - u).abs() <= ROOT_TOL * 1e-2 {
            return Ok(newton.clamp(0.0, 1.0));
        }
        u = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    Err(Error::Numerical(format!(
        "marginal inversion did not converge for q={q} (bracket [{lo}, {hi}])"
    )))
}

/// Closed-form inverse of the conditional CDF of `V` (positive quadratic root).
pub fn inverse_conditional_v(q: f64, u: f64) -> f64 {
    let u2 = u * u;
    let c = 2.0 * q * (2.0 * u2 + 2.0);
    if c <= 0.0 {
        return 0.0;
    }
    // v = -u^2 + sqrt(u^4 + c), rearranged to avoid cancellation.
    c / (u2 + (u2 * u2 + c).sqrt())
}

/// One event `(x, y)` by inverse-CDF sampling of `(U, V)` and a mixture flip.
pub fn sample_event_mixture<R: Rng + ?Sized>(rng: &mut R, mix_weight: f64) -> Result<(f64, f64)> {
    let reflect = rng.random::<f64>() >= mix_weight;
    let u = inverse_marginal_u(rng.random::<f64>())?;
    let v = inverse_conditional_v(rng.random::<f64>(), u);
    Ok((if reflect { 1.0 - u } else { u }, v.min(SUPPORT_M2)))
}

pub fn sample_event<R: Rng + ?Sized>(rng: &mut R) -> Result<(f64, f64)> {
    sample_event_mixture(rng, DEFAULT_MIX_WEIGHT)
}

/// Rejection sampler under the flat envelope `sup f0`; an independent route
/// to the same law as [`sample_event`].
pub fn sample_event_rejection<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    loop {
        let x = rng.random::<f64>() * SUPPORT_M1;
        let y = rng.random::<f64>() * SUPPORT_M2;
        let f = DEFAULT_MIX_WEIGHT * base_density(x, y)
            + (1.0 - DEFAULT_MIX_WEIGHT) * base_density(1.0 - x, y);
        if rng.random::<f64>() * F0_SUP < f {
            return (x, y);
        }
    }
}

/// Inspection time `sqrt(U)`, density `2t` on `[0, 1]`.
pub fn sample_censoring<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random::<f64>().sqrt()
}

/// Inspection-time density used by the simulator.
pub fn censoring_density(t: f64) -> f64 {
    if (0.0..=1.0).contains(&t) {
        2.0 * t
    } else {
        0.0
    }
}

/// Latent record kept for diagnostics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentRecord {
    pub x: f64,
    pub y: f64,
    pub t: f64,
}

/// Observations and their latent truth.
pub fn simulate_with_truth(spec: &SimSpec) -> Result<(Vec<Observation>, Vec<LatentRecord>)> {
    spec.validate()?;
    let mut rng = stream_rng(spec.seed, 0);
    let mut obs = Vec::with_capacity(spec.n);
    let mut truth = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let (x, y) = sample_event_mixture(&mut rng, spec.mix_weight)?;
        let t = sample_censoring(&mut rng);
        let z = if x <= t { y } else { 0.0 };
        obs.push(Observation::new(t, z));
        truth.push(LatentRecord { x, y, t });
    }
    Ok((obs, truth))
}

pub fn simulate_dataset(spec: &SimSpec) -> Result<Vec<Observation>> {
    simulate_with_truth(spec).map(|(obs, _)| obs)
}
