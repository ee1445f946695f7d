//! Rectangular bin partition of the support and the piecewise-constant
//! density it carries.
//!
//! Bins are indexed row-major over mark rows: bin `(j, k)` (time column `j`,
//! mark row `k`) has linear index `k * J + j`. Every other module relies on
//! this ordering, in particular the graph Laplacian and the CSV layout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `sum(theta) == 1` accepted by [`BinWeights::new`].
pub const WEIGHT_SUM_TOL: f64 = 1e-10;

/// Partition of `[0, m1] x [0, m2]` into `j_bins x k_bins` equal cells.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    m1: f64,
    m2: f64,
    j_bins: usize,
    k_bins: usize,
}

impl GridSpec {
    pub fn new(m1: f64, m2: f64, j_bins: usize, k_bins: usize) -> Result<Self> {
        if !(m1.is_finite() && m1 > 0.0) || !(m2.is_finite() && m2 > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "support bounds must be positive and finite, got m1={m1}, m2={m2}"
            )));
        }
        if j_bins == 0 || k_bins == 0 {
            return Err(Error::InvalidArgument(format!(
                "bin counts must be positive, got {j_bins}x{k_bins}"
            )));
        }
        Ok(Self {
            m1,
            m2,
            j_bins,
            k_bins,
        })
    }

    pub fn m1(&self) -> f64 {
        self.m1
    }

    pub fn m2(&self) -> f64 {
        self.m2
    }

    /// Number of time columns `J`.
    pub fn j_bins(&self) -> usize {
        self.j_bins
    }

    /// Number of mark rows `K`.
    pub fn k_bins(&self) -> usize {
        self.k_bins
    }

    pub fn dx(&self) -> f64 {
        self.m1 / self.j_bins as f64
    }

    pub fn dy(&self) -> f64 {
        self.m2 / self.k_bins as f64
    }

    /// Total number of bins `J * K`.
    pub fn p(&self) -> usize {
        self.j_bins * self.k_bins
    }

    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dy()
    }

    pub fn index_of(&self, j: usize, k: usize) -> usize {
        debug_assert!(j < self.j_bins && k < self.k_bins);
        k * self.j_bins + j
    }

    pub fn coords_of(&self, index: usize) -> (usize, usize) {
        debug_assert!(index < self.p());
        (index % self.j_bins, index / self.j_bins)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        (0.0..=self.m1).contains(&x) && (0.0..=self.m2).contains(&y)
    }

    pub(crate) fn check_point(&self, x: f64, y: f64) -> Result<()> {
        if self.contains(x, y) {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "point ({x}, {y}) outside support [0, {}] x [0, {}]",
                self.m1, self.m2
            )))
        }
    }

    /// Column containing time `x`; the right boundary `m1` maps to the last column.
    pub fn column_of(&self, x: f64) -> usize {
        ((x / self.dx()).floor() as usize).min(self.j_bins - 1)
    }

    /// Row containing mark `y`; the top boundary `m2` maps to the last row.
    pub fn row_of(&self, y: f64) -> usize {
        ((y / self.dy()).floor() as usize).min(self.k_bins - 1)
    }

    /// Linear index of the bin containing `(x, y)`.
    pub fn bin_of(&self, x: f64, y: f64) -> Result<usize> {
        self.check_point(x, y)?;
        Ok(self.index_of(self.column_of(x), self.row_of(y)))
    }

    /// Fraction of column `j` lying in `[0, x]`.
    pub(crate) fn column_fraction_below(&self, j: usize, x: f64) -> f64 {
        ((x - j as f64 * self.dx()) / self.dx()).clamp(0.0, 1.0)
    }

    pub(crate) fn row_fraction_below(&self, k: usize, y: f64) -> f64 {
        ((y - k as f64 * self.dy()) / self.dy()).clamp(0.0, 1.0)
    }
}

/// Probability vector over the bins of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct BinWeights {
    theta: Vec<f64>,
}

impl BinWeights {
    /// Validates nonnegativity and unit sum (within [`WEIGHT_SUM_TOL`]).
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if theta.is_empty() {
            return Err(Error::InvalidArgument("empty weight vector".into()));
        }
        if let Some((i, v)) = theta
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::InvalidArgument(format!(
                "weight {i} is {v}, expected a finite nonnegative value"
            )));
        }
        let sum: f64 = theta.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidArgument(format!(
                "weights sum to {sum}, expected 1"
            )));
        }
        Ok(Self { theta })
    }

    /// Scales a nonnegative vector to unit sum.
    pub fn normalised(mut raw: Vec<f64>) -> Result<Self> {
        let sum: f64 = raw.iter().sum();
        if !(sum.is_finite() && sum > 0.0) || raw.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "cannot normalise weights with total {sum}"
            )));
        }
        raw.iter_mut().for_each(|v| *v /= sum);
        Ok(Self { theta: raw })
    }

    /// Callers guarantee a valid probability vector up to rounding.
    pub(crate) fn from_vec_unchecked(theta: Vec<f64>) -> Self {
        debug_assert!((theta.iter().sum::<f64>() - 1.0).abs() < 1e-8);
        Self { theta }
    }

    pub fn uniform(p: usize) -> Self {
        Self {
            theta: vec![1.0 / p as f64; p],
        }
    }

    pub fn point_mass(p: usize, index: usize) -> Result<Self> {
        if index >= p {
            return Err(Error::InvalidArgument(format!(
                "bin {index} out of range for {p} bins"
            )));
        }
        let mut theta = vec![0.0; p];
        theta[index] = 1.0;
        Ok(Self { theta })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.theta
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.theta
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub(crate) fn check_grid(&self, grid: &GridSpec) -> Result<()> {
        if self.len() != grid.p() {
            return Err(Error::GridMismatch(format!(
                "{} weights for a grid with {} bins",
                self.len(),
                grid.p()
            )));
        }
        Ok(())
    }
}

/// Piecewise-constant density `theta_l / (dx * dy)` at `(x, y)`.
pub fn density_at(grid: &GridSpec, w: &BinWeights, x: f64, y: f64) -> Result<f64> {
    w.check_grid(grid)?;
    let l = grid.bin_of(x, y)?;
    Ok(w.theta[l] / grid.cell_area())
}

/// Distribution function `F(x, y)` of the piecewise-constant density.
pub fn cdf_at(grid: &GridSpec, w: &BinWeights, x: f64, y: f64) -> Result<f64> {
    w.check_grid(grid)?;
    grid.check_point(x, y)?;
    let col_frac: Vec<f64> = (0..grid.j_bins())
        .map(|j| grid.column_fraction_below(j, x))
        .collect();
    let mut total = 0.0;
    for k in 0..grid.k_bins() {
        let row_frac = grid.row_fraction_below(k, y);
        if row_frac == 0.0 {
            continue;
        }
        let row = &w.theta[k * grid.j_bins()..(k + 1) * grid.j_bins()];
        let s: f64 = row.iter().zip(&col_frac).map(|(t, c)| t * c).sum();
        total += row_frac * s;
    }
    Ok(total.min(1.0))
}

/// Subdivisions per bin side for the fine midpoint rule; the coarse rule uses half.
const QUAD_FINE: usize = 64;
/// Relative disagreement between the coarse and fine rules that counts as failure.
const QUAD_REL_TOL: f64 = 1e-3;

/// Bin masses `int_bin f` of a reference density, renormalised to unit sum.
///
/// Each bin is integrated with a 64x64 midpoint rule and Richardson-corrected
/// against the 32x32 rule, which is exact for integrands quadratic in each
/// coordinate.
pub fn true_bin_masses<F>(grid: &GridSpec, f: F) -> Result<BinWeights>
where
    F: Fn(f64, f64) -> f64,
{
    let (dx, dy) = (grid.dx(), grid.dy());
    let mut masses = Vec::with_capacity(grid.p());
    for l in 0..grid.p() {
        let (j, k) = grid.coords_of(l);
        let (x0, y0) = (j as f64 * dx, k as f64 * dy);
        let fine = midpoint_rule(&f, x0, y0, dx, dy, QUAD_FINE);
        let coarse = midpoint_rule(&f, x0, y0, dx, dy, QUAD_FINE / 2);
        if !fine.is_finite() || !coarse.is_finite() || fine < -1e-12 {
            return Err(Error::Numerical(format!(
                "bin ({j}, {k}): integrand produced non-finite or negative mass \
                 (fine={fine}, coarse={coarse})"
            )));
        }
        let diff = (fine - coarse).abs();
        if diff > QUAD_REL_TOL * fine.abs() + 1e-14 {
            return Err(Error::Numerical(format!(
                "bin ({j}, {k}): quadrature did not converge \
                 (64x64 rule {fine:.6e}, 32x32 rule {coarse:.6e})"
            )));
        }
        masses.push(((4.0 * fine - coarse) / 3.0).max(0.0));
    }
    BinWeights::normalised(masses).map_err(|e| Error::Numerical(e.to_string()))
}

fn midpoint_rule<F>(f: &F, x0: f64, y0: f64, dx: f64, dy: f64, n: usize) -> f64
where
    F: Fn(f64, f64) -> f64,
{
    let (hx, hy) = (dx / n as f64, dy / n as f64);
    let mut s = 0.0;
    for a in 0..n {
        let x = x0 + (a as f64 + 0.5) * hx;
        for b in 0..n {
            s += f(x, y0 + (b as f64 + 0.5) * hy);
        }
    }
    s * hx * hy
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(j: usize, k: usize) -> GridSpec {
        GridSpec::new(1.0, 2.0, j, k).unwrap()
    }

    #[test]
    fn make_grid_examples() {
        let g = grid(25, 50);
        assert!((g.dx() - 0.04).abs() < 1e-15);
        assert!((g.dy() - 0.04).abs() < 1e-15);
        assert_eq!(g.p(), 1250);

        let g = grid(1, 1);
        assert_eq!((g.dx(), g.dy(), g.p()), (1.0, 2.0, 1));

        let g = grid(5, 10);
        assert!((g.dx() - 0.2).abs() < 1e-15 && (g.dy() - 0.2).abs() < 1e-15);
        assert_eq!(g.p(), 50);
    }

    #[test]
    fn make_grid_rejects_nonpositive() {
        assert!(GridSpec::new(0.0, 2.0, 1, 1).is_err());
        assert!(GridSpec::new(1.0, -2.0, 1, 1).is_err());
        assert!(GridSpec::new(1.0, 2.0, 0, 1).is_err());
        assert!(GridSpec::new(1.0, 2.0, 1, 0).is_err());
        assert!(GridSpec::new(f64::NAN, 2.0, 1, 1).is_err());
    }

    #[test]
    fn index_coords_roundtrip() {
        let g = grid(7, 3);
        for l in 0..g.p() {
            let (j, k) = g.coords_of(l);
            assert_eq!(g.index_of(j, k), l);
        }
        assert_eq!(g.index_of(2, 1), 9);
    }

    #[test]
    fn boundaries_map_to_one_bin() {
        let g = grid(2, 2);
        assert_eq!(g.bin_of(0.5, 1.0).unwrap(), g.index_of(1, 1));
        assert_eq!(g.bin_of(1.0, 2.0).unwrap(), g.index_of(1, 1));
        assert_eq!(g.bin_of(0.0, 0.0).unwrap(), 0);
        assert!(g.bin_of(1.0 + 1e-12, 0.0).is_err());
        assert!(g.bin_of(-1e-12, 0.0).is_err());
    }

    #[test]
    fn density_examples() {
        let g = grid(1, 1);
        let w = BinWeights::new(vec![1.0]).unwrap();
        assert_eq!(density_at(&g, &w, 0.3, 1.7).unwrap(), 0.5);

        let g = grid(2, 2);
        let w = BinWeights::uniform(4);
        assert!((density_at(&g, &w, 0.1, 0.1).unwrap() - 0.5).abs() < 1e-15);

        let w = BinWeights::point_mass(4, 0).unwrap();
        assert_eq!(density_at(&g, &w, 0.9, 1.9).unwrap(), 0.0);
        assert!(density_at(&g, &w, 1.1, 0.0).is_err());
    }

    #[test]
    fn cdf_examples() {
        let g = grid(2, 2);
        let w = BinWeights::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        assert_eq!(cdf_at(&g, &w, 0.0, 1.3).unwrap(), 0.0);
        assert!((cdf_at(&g, &w, 1.0, 2.0).unwrap() - 1.0).abs() < 1e-15);
        let u = BinWeights::uniform(4);
        assert!((cdf_at(&g, &u, 0.5, 1.0).unwrap() - 0.25).abs() < 1e-15);
        assert!(cdf_at(&g, &u, 0.5, 2.5).is_err());
    }

    #[test]
    fn weights_validation() {
        assert!(BinWeights::new(vec![0.5, 0.6]).is_err());
        assert!(BinWeights::new(vec![1.5, -0.5]).is_err());
        assert!(BinWeights::new(vec![]).is_err());
        assert!(BinWeights::new(vec![0.25; 4]).is_ok());
        assert!(BinWeights::point_mass(3, 3).is_err());
    }

    fn f0(x: f64, y: f64) -> f64 {
        0.3 * 0.375 * (x * x + y) + 0.7 * 0.375 * ((1.0 - x).powi(2) + y)
    }

    #[test]
    fn true_masses_examples() {
        let w = true_bin_masses(&grid(1, 1), f0).unwrap();
        assert_eq!(w.as_slice(), &[1.0]);

        let w = true_bin_masses(&grid(2, 2), |_, _| 0.5).unwrap();
        for v in w.as_slice() {
            assert!((v - 0.25).abs() < 1e-15);
        }

        // Exact value 0.175 from integrating both mixture components over
        // [0, 0.5] x [0, 1] by hand.
        let w = true_bin_masses(&grid(2, 2), f0).unwrap();
        assert!((w.as_slice()[0] - 0.175).abs() < 1e-12, "{:?}", w);
    }

    #[test]
    fn true_masses_reject_discontinuity_inside_bin() {
        let err = true_bin_masses(&grid(1, 1), |x, _| if x < 0.3 { 1.0 } else { 0.2 });
        assert!(matches!(err, Err(Error::Numerical(_))));
    }

    fn random_weights(p: usize) -> impl Strategy<Value = BinWeights> {
        prop::collection::vec(0.0f64..1.0, p)
            .prop_filter("nonzero", |v| v.iter().sum::<f64>() > 1e-3)
            .prop_map(|v| BinWeights::normalised(v).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn density_integrates_to_one(w in random_weights(12)) {
            let g = grid(3, 4);
            // Midpoint rule on a mesh aligned with the bins is exact.
            let n = 60;
            let (hx, hy) = (g.m1() / n as f64, g.m2() / n as f64);
            let mut s = 0.0;
            for a in 0..n {
                for b in 0..n {
                    let x = (a as f64 + 0.5) * hx;
                    let y = (b as f64 + 0.5) * hy;
                    s += density_at(&g, &w, x, y).unwrap();
                }
            }
            prop_assert!((s * hx * hy - 1.0).abs() < 1e-8);
        }

        #[test]
        fn cdf_monotone(w in random_weights(20),
                        pts in prop::collection::vec((0.0f64..1.0, 0.0f64..2.0, 0.0f64..1.0, 0.0f64..2.0), 16)) {
            let g = grid(4, 5);
            for (x1, y1, x2, y2) in pts {
                let (xa, xb) = (x1.min(x2), x1.max(x2));
                let (ya, yb) = (y1.min(y2), y1.max(y2));
                let lo = cdf_at(&g, &w, xa, ya).unwrap();
                prop_assert!(cdf_at(&g, &w, xb, ya).unwrap() >= lo - 1e-15);
                prop_assert!(cdf_at(&g, &w, xa, yb).unwrap() >= lo - 1e-15);
            }
        }

        #[test]
        fn bin_masses_roundtrip_piecewise_constant(w in random_weights(15)) {
            let g = grid(5, 3);
            let back = true_bin_masses(&g, |x, y| density_at(&g, &w, x, y).unwrap()).unwrap();
            for (a, b) in back.as_slice().iter().zip(w.as_slice()) {
                prop_assert!((a - b).abs() < 1e-10);
            }
        }
    }
}
