//! Independent oracles shared by the integration tests and the acceptance
//! suite. Nothing here calls the library routine it is used to check.

#![allow(dead_code)]

use csmark::{BinWeights, GridSpec, Units};
use minilp::{ComparisonOp, OptimizationDirection, Problem};
use rand::Rng;

/// Dense transport LP over all `p^2` bin pairs with the l1 ground cost
/// between bin centres.
pub fn lp_wasserstein(grid: &GridSpec, a: &[f64], b: &[f64], units: Units) -> f64 {
    let p = grid.p();
    let (sx, sy) = match units {
        Units::Index => (1.0, 1.0),
        Units::Physical => (grid.m1() / grid.j_bins() as f64, grid.m2() / grid.k_bins() as f64),
    };
    let centre = |l: usize| ((l % grid.j_bins()) as f64, (l / grid.j_bins()) as f64);
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let mut vars = Vec::with_capacity(p * p);
    for i in 0..p {
        for j in 0..p {
            let (xi, yi) = centre(i);
            let (xj, yj) = centre(j);
            let cost = (xi - xj).abs() * sx + (yi - yj).abs() * sy;
            vars.push(lp.add_var(cost, (0.0, f64::INFINITY)));
        }
    }
    for i in 0..p {
        let row: Vec<_> = (0..p).map(|j| (vars[i * p + j], 1.0)).collect();
        lp.add_constraint(row.as_slice(), ComparisonOp::Eq, a[i]);
    }
    for j in 0..p {
        let col: Vec<_> = (0..p).map(|i| (vars[i * p + j], 1.0)).collect();
        lp.add_constraint(col.as_slice(), ComparisonOp::Eq, b[j]);
    }
    lp.solve().expect("transport LP is feasible").objective()
}

/// Eigenvalues of the grid Laplacian from the closed form for a Cartesian
/// product of two path graphs.
pub fn laplacian_spectrum(j_bins: usize, k_bins: usize) -> Vec<f64> {
    let path = |n: usize| -> Vec<f64> {
        (0..n)
            .map(|a| 2.0 - 2.0 * (std::f64::consts::PI * a as f64 / n as f64).cos())
            .collect()
    };
    let (px, py) = (path(j_bins), path(k_bins));
    let mut out: Vec<f64> = px.iter().flat_map(|&a| py.iter().map(move |&b| a + b)).collect();
    out.sort_by(f64::total_cmp);
    out
}

/// Random probability vector with occasional exact zeros.
pub fn random_weights<R: Rng>(rng: &mut R, p: usize) -> BinWeights {
    loop {
        let raw: Vec<f64> = (0..p)
            .map(|_| if rng.random::<f64>() < 0.2 { 0.0 } else { rng.random::<f64>() })
            .collect();
        if raw.iter().any(|&v| v > 0.0) {
            return BinWeights::normalised(raw).unwrap();
        }
    }
}

/// Kolmogorov statistic of `xs` against the standard normal.
pub fn ks_standard_normal(xs: &mut [f64]) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    let n01 = Normal::new(0.0, 1.0).unwrap();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = n01.cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic critical value of `sqrt(n) D` at level 0.001.
pub const KS_CRIT_0001: f64 = 1.9495;

/// Batch-means standard error of the mean of a correlated series.
pub fn batch_means_se(x: &[f64], batches: usize) -> f64 {
    let size = x.len() / batches;
    let means: Vec<f64> = x
        .chunks_exact(size)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect();
    let m = means.iter().sum::<f64>() / means.len() as f64;
    let var = means.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (means.len() - 1) as f64;
    (var / means.len() as f64).sqrt()
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Composite Simpson rule with `n` (even) intervals.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// The two-bin instance: `[0, 1] x [0, 2]` split into two columns, one
/// unmarked observation at `t = 0.3` and one marked at `t = 0.8, z = 1`.
pub mod tiny {
    use super::simpson;
    use csmark::{GridSpec, Observation};

    pub fn grid() -> GridSpec {
        GridSpec::new(1.0, 2.0, 2, 1).unwrap()
    }

    pub fn data() -> Vec<Observation> {
        vec![Observation::new(0.3, 0.0), Observation::new(0.8, 1.0)]
    }

    /// Likelihood as a function of the first bin's mass, written out by hand:
    /// the unmarked record shades 40% of column 0 and all of column 1, the
    /// marked one all of column 0 and 60% of column 1.
    pub fn likelihood(t0: f64) -> f64 {
        let t1 = 1.0 - t0;
        (0.4 * t0 + t1) * (t0 + 0.6 * t1)
    }

    /// Outer integral over `tau ~ Exp(1)`, substituting `tau = -ln u`.
    fn over_tau<F: Fn(f64) -> f64>(f: F) -> f64 {
        simpson(|u| if u <= 0.0 || u >= 1.0 { 0.0 } else { f(-u.ln()) }, 0.0, 1.0, 20_000)
    }

    /// Posterior mean of the first bin's mass under the Dirichlet prior,
    /// from exact `Beta(tau, tau)` moments of the quadratic likelihood.
    pub fn dirichlet_posterior_mean() -> f64 {
        // L(t) = 0.6 + 0.04 t - 0.24 t^2.
        let m = |tau: f64| {
            let m1 = 0.5;
            let m2 = (tau + 1.0) / (2.0 * (2.0 * tau + 1.0));
            let m3 = (tau + 2.0) / (4.0 * (2.0 * tau + 1.0));
            (m1, m2, m3)
        };
        let num = over_tau(|tau| {
            let (m1, m2, m3) = m(tau);
            0.6 * m1 + 0.04 * m2 - 0.24 * m3
        });
        let den = over_tau(|tau| {
            let (m1, m2, _) = m(tau);
            0.6 + 0.04 * m1 - 0.24 * m2
        });
        num / den
    }

    /// Same under the logistic-normal prior. With two bins the softmax only
    /// sees `H0 - H1`, which is `N(0, 8 tau / 9)` for the precision
    /// `[[1.25, -1], [-1, 1.25]]`.
    pub fn lngl_posterior_mean() -> f64 {
        let sigmoid = |d: f64| 1.0 / (1.0 + (-d).exp());
        let inner = |tau: f64, k: i32| {
            let s = (8.0 * tau / 9.0).sqrt();
            simpson(
                |x| {
                    let t0 = sigmoid(s * x);
                    let phi = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
                    phi * t0.powi(k) * likelihood(t0)
                },
                -12.0,
                12.0,
                2_000,
            )
        };
        let over = |k: i32| simpson(|u| if u <= 0.0 || u >= 1.0 { 0.0 } else { inner(-u.ln(), k) }, 0.0, 1.0, 4_000);
        over(1) / over(0)
    }
}
