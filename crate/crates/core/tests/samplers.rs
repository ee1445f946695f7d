mod common;

use csmark::rng::stream_rng;
use csmark::samplers::dirichlet::{impute_bins, run_dirichlet_chain};
use csmark::samplers::lngl::{run_lngl_chain, run_lngl_chain_with};
use csmark::{
    censoring_infos, simulate_dataset, BinWeights, ChainConfig, GridLaplacian, GridSpec, Observation, SimSpec,
    TauPrior,
};
use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

// 0.999 quantile of chi-square with 3 degrees of freedom.
const CHI2_3_0999: f64 = 16.266;

fn chi_square(counts: &[u32], probs: &[f64]) -> f64 {
    let n: u32 = counts.iter().sum();
    counts
        .iter()
        .zip(probs)
        .map(|(&c, &p)| {
            let e = p * n as f64;
            (c as f64 - e).powi(2) / e
        })
        .sum()
}

#[test]
fn imputation_frequencies_match_shaded_fractions() {
    let g = GridSpec::new(1.0, 2.0, 2, 2).unwrap();
    let draws = 10_000;
    let mut rng = stream_rng(21, 0);

    // Whole support shaded, uniform weights: all bins equally likely.
    let data = vec![Observation::new(0.0, 0.0); draws];
    let infos = censoring_infos(&g, &data).unwrap();
    let counts = impute_bins(&g, &BinWeights::uniform(4), &infos, &mut rng).unwrap();
    assert!(chi_square(&counts, &[0.25; 4]) < CHI2_3_0999, "{counts:?}");

    // Unmarked at t = 0.3 covers 40% of column 0 and all of column 1.
    let theta = [0.1, 0.2, 0.3, 0.4];
    let w = BinWeights::new(theta.to_vec()).unwrap();
    let data = vec![Observation::new(0.3, 0.0); draws];
    let infos = censoring_infos(&g, &data).unwrap();
    let counts = impute_bins(&g, &w, &infos, &mut rng).unwrap();
    let raw = [0.4 * theta[0], theta[1], 0.4 * theta[2], theta[3]];
    let total: f64 = raw.iter().sum();
    let probs: Vec<f64> = raw.iter().map(|r| r / total).collect();
    assert!(chi_square(&counts, &probs) < CHI2_3_0999, "{counts:?}");
}

#[test]
fn lngl_prior_means_match_direct_sampling() {
    // No data: the chain targets the prior, which is sampled independently
    // here from a dense Cholesky factor of the precision matrix.
    let g = GridSpec::new(1.0, 2.0, 3, 2).unwrap();
    let p = g.p();
    let lap = GridLaplacian::new(&g).unwrap();
    let cfg = ChainConfig {
        iterations: 200_000,
        burnin_fraction: 0.05,
        rho: 0.5,
        delta: 1.0,
        seed: 31,
        keep_draws: true,
        ..ChainConfig::default()
    };
    let out = run_lngl_chain_with(&cfg, &lap, &[]).unwrap();
    let kept = &out.theta_draws[cfg.burnin_draws()..];

    let ups = DMatrix::from_row_slice(p, p, &lap.precision().unwrap().to_dense());
    let lower = ups.cholesky().unwrap().l();
    let lt = lower.transpose();
    let prior = TauPrior::default();
    let mut rng = stream_rng(32, 0);
    let n_direct = 200_000;
    let mut direct = vec![Vec::with_capacity(n_direct); p];
    for _ in 0..n_direct {
        let tau = prior.sample(&mut rng);
        let z = DVector::from_iterator(p, (0..p).map(|_| StandardNormal.sample(&mut rng)));
        // L^T h = z gives cov(h) = Upsilon^{-1}.
        let h = lt.solve_upper_triangular(&z).unwrap() * tau.sqrt();
        let mx = h.max();
        let e: Vec<f64> = h.iter().map(|v| (v - mx).exp()).collect();
        let s: f64 = e.iter().sum();
        for (l, v) in e.iter().enumerate() {
            direct[l].push(v / s);
        }
    }

    for l in 0..p {
        let chain: Vec<f64> = kept.iter().map(|d| d[l] as f64).collect();
        let m_chain = common::mean(&chain);
        let se_chain = common::batch_means_se(&chain, 50);
        let m_direct = common::mean(&direct[l]);
        let var = direct[l].iter().map(|v| (v - m_direct).powi(2)).sum::<f64>() / n_direct as f64;
        let se_direct = (var / n_direct as f64).sqrt();
        let se = (se_chain.powi(2) + se_direct.powi(2)).sqrt();
        assert!(
            (m_chain - m_direct).abs() < 4.0 * se,
            "bin {l}: chain {m_chain} vs direct {m_direct} (se {se})"
        );
    }
}

#[test]
fn both_samplers_run_at_study_size() {
    let data = simulate_dataset(&SimSpec::new(200, 41)).unwrap();
    let cfg = ChainConfig { iterations: 3_000, seed: 42, ..ChainConfig::default() };

    let g = GridSpec::new(1.0, 2.0, 25, 50).unwrap();
    let out = run_dirichlet_chain(&cfg, &g, &data).unwrap();
    assert_eq!(out.posterior_mean.len(), g.p());
    assert!((0.0..=1.0).contains(&out.accept_tau));
    assert_eq!(out.tau_trace.len(), cfg.recorded());

    let g = GridSpec::new(1.0, 2.0, 10, 10).unwrap();
    let out = run_lngl_chain(&cfg, &g, &data).unwrap();
    assert_eq!(out.posterior_mean.len(), 100);
    assert!(out.accept_z > 0.0 && out.accept_z < 1.0);
    assert!(out.accept_tau > 0.0 && out.accept_tau < 1.0);
    assert_eq!(out.level_trace.len(), cfg.recorded());
    let sum: f64 = out.posterior_mean.as_slice().iter().sum();
    assert!((sum - 1.0).abs() < 1e-9);
}
