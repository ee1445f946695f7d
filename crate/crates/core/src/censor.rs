//! Censoring geometry: which part of the support is compatible with a
//! current-status observation, and the likelihood it induces.
//!
//! An observation `(t, z)` with `z > 0` says the event happened before `t`
//! with mark `z`: the compatible region is `{x <= t}` within the mark row
//! holding `z`. With `z = 0` the event had not happened by `t`: the region is
//! `{x > t}` across all marks. For a piecewise-constant density the
//! likelihood contribution is `theta . a` where `a` holds the shaded fraction
//! of each cell, up to factors that do not depend on `theta`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{cdf_at, density_at, BinWeights, GridSpec};

/// One current-status record: inspection time `t` and `z = delta * y`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub t: f64,
    pub z: f64,
}

impl Observation {
    pub fn new(t: f64, z: f64) -> Self {
        Self { t, z }
    }

    pub fn has_mark(&self) -> bool {
        self.z > 0.0
    }

    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        if !(self.t.is_finite() && (0.0..=grid.m1()).contains(&self.t)) {
            return Err(Error::Domain(format!(
                "inspection time {} outside [0, {}]",
                self.t,
                grid.m1()
            )));
        }
        if !(self.z.is_finite() && (0.0..=grid.m2()).contains(&self.z)) {
            return Err(Error::Domain(format!(
                "mark {} outside [0, {}]",
                self.z,
                grid.m2()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Region {
    /// Mark observed in `row`: columns `0..full` entirely, then column
    /// `full` with fraction `partial` when that is positive.
    Marked {
        row: usize,
        full: usize,
        partial: f64,
    },
    /// Event after `t`: column `first` with fraction `first_frac`, then every
    /// later column entirely, over all rows. `first == J` means nothing is shaded.
    Unmarked { first: usize, first_frac: f64 },
}

/// Sparse shaded-area-fraction vector of one observation.
///
/// Stored as the shaded region's geometry; [`CensoringInfo::entries`] expands
/// it to explicit `(bin, fraction)` pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct CensoringInfo {
    j_bins: usize,
    k_bins: usize,
    region: Region,
}

/// Shaded fractions for `obs` on `grid`.
pub fn censoring_info(grid: &GridSpec, obs: &Observation) -> Result<CensoringInfo> {
    obs.validate(grid)?;
    let j_bins = grid.j_bins();
    let s = obs.t / grid.dx();
    let mut full = (s.floor() as usize).min(j_bins);
    let mut partial = s - full as f64;
    if full == j_bins || partial <= 0.0 {
        partial = 0.0;
    }
    if partial >= 1.0 {
        // Rounding in t / dx landed on the next boundary.
        full += 1;
        partial = 0.0;
    }
    let region = if obs.has_mark() {
        Region::Marked {
            row: grid.row_of(obs.z),
            full,
            partial,
        }
    } else if full >= j_bins {
        Region::Unmarked {
            first: j_bins,
            first_frac: 0.0,
        }
    } else if partial > 0.0 {
        Region::Unmarked {
            first: full,
            first_frac: 1.0 - partial,
        }
    } else {
        Region::Unmarked {
            first: full,
            first_frac: 1.0,
        }
    };
    Ok(CensoringInfo {
        j_bins,
        k_bins: grid.k_bins(),
        region,
    })
}

/// Censoring info for a whole dataset; the error names the offending row.
pub fn censoring_infos(grid: &GridSpec, data: &[Observation]) -> Result<Vec<CensoringInfo>> {
    data.iter()
        .enumerate()
        .map(|(i, obs)| {
            censoring_info(grid, obs).map_err(|e| Error::DataValidation {
                row: i,
                message: e.to_string(),
            })
        })
        .collect()
}

impl CensoringInfo {
    pub fn has_mark(&self) -> bool {
        matches!(self.region, Region::Marked { .. })
    }

    /// True when no cell is shaded, e.g. a mark observed at `t = 0`. Such an
    /// observation has likelihood zero under every histogram.
    pub fn is_empty(&self) -> bool {
        match self.region {
            Region::Marked { full, partial, .. } => full == 0 && partial <= 0.0,
            Region::Unmarked { first, .. } => first >= self.j_bins,
        }
    }

    pub fn check_grid(&self, grid: &GridSpec) -> Result<()> {
        if self.j_bins != grid.j_bins() || self.k_bins != grid.k_bins() {
            return Err(Error::GridMismatch(format!(
                "censoring info built for {}x{} bins, grid has {}x{}",
                self.j_bins,
                self.k_bins,
                grid.j_bins(),
                grid.k_bins()
            )));
        }
        Ok(())
    }

    /// Explicit `(bin index, fraction)` pairs, fractions in `(0, 1]`.
    pub fn entries(&self) -> Vec<(usize, f64)> {
        let j_bins = self.j_bins;
        let mut out = Vec::new();
        match self.region {
            Region::Marked { row, full, partial } => {
                let base = row * j_bins;
                out.extend((0..full).map(|j| (base + j, 1.0)));
                if partial > 0.0 {
                    out.push((base + full, partial));
                }
            }
            Region::Unmarked { first, first_frac } => {
                if first < j_bins {
                    for k in 0..self.k_bins {
                        let base = k * j_bins;
                        if first_frac > 0.0 {
                            out.push((base + first, first_frac));
                        }
                        out.extend((first + 1..j_bins).map(|j| (base + j, 1.0)));
                    }
                }
            }
        }
        out
    }

    /// `theta . a` by explicit sparse summation.
    pub fn dot(&self, theta: &[f64]) -> f64 {
        self.entries().iter().map(|&(l, a)| theta[l] * a).sum()
    }
}

/// `sum_i log(theta . a_i)`, or `-inf` when any term vanishes.
///
/// Differs from the full log-likelihood by `sum_i log g(t_i)` and
/// `-log(dy)` per marked observation, neither of which depends on `theta`.
pub fn loglik(w: &BinWeights, infos: &[CensoringInfo]) -> f64 {
    let theta = w.as_slice();
    let mut total = 0.0;
    for info in infos {
        let m = info.dot(theta);
        if m <= 0.0 {
            return f64::NEG_INFINITY;
        }
        total += m.ln();
    }
    total
}

/// Prefix sums of one weight vector, giving `theta . a_i` in O(1) per
/// observation and drawing a bin from the shaded region in O(log p).
#[derive(Clone, Debug)]
pub struct ShadedMasses {
    j_bins: usize,
    k_bins: usize,
    /// Per row: `J + 1` running sums over columns.
    row_prefix: Vec<f64>,
    /// Per column: `K + 1` running sums over rows.
    col_prefix: Vec<f64>,
    col_mass: Vec<f64>,
    /// `J + 1` running sums of column masses.
    col_cum: Vec<f64>,
    /// `J + 1` tail sums of column masses.
    col_tail: Vec<f64>,
}

impl ShadedMasses {
    pub fn new(grid: &GridSpec) -> Self {
        let (j, k) = (grid.j_bins(), grid.k_bins());
        Self {
            j_bins: j,
            k_bins: k,
            row_prefix: vec![0.0; k * (j + 1)],
            col_prefix: vec![0.0; j * (k + 1)],
            col_mass: vec![0.0; j],
            col_cum: vec![0.0; j + 1],
            col_tail: vec![0.0; j + 1],
        }
    }

    pub fn update(&mut self, theta: &[f64]) {
        let (jb, kb) = (self.j_bins, self.k_bins);
        debug_assert_eq!(theta.len(), jb * kb);
        self.col_mass.iter_mut().for_each(|v| *v = 0.0);
        for k in 0..kb {
            let row = &theta[k * jb..(k + 1) * jb];
            let pre = &mut self.row_prefix[k * (jb + 1)..(k + 1) * (jb + 1)];
            let mut s = 0.0;
            pre[0] = 0.0;
            for (j, &v) in row.iter().enumerate() {
                s += v;
                pre[j + 1] = s;
                self.col_mass[j] += v;
            }
        }
        for j in 0..jb {
            let pre = &mut self.col_prefix[j * (kb + 1)..(j + 1) * (kb + 1)];
            let mut s = 0.0;
            pre[0] = 0.0;
            for k in 0..kb {
                s += theta[k * jb + j];
                pre[k + 1] = s;
            }
        }
        let mut s = 0.0;
        for j in 0..jb {
            self.col_cum[j] = s;
            s += self.col_mass[j];
        }
        self.col_cum[jb] = s;
        let mut s = 0.0;
        self.col_tail[jb] = 0.0;
        for j in (0..jb).rev() {
            s += self.col_mass[j];
            self.col_tail[j] = s;
        }
    }

    fn row_sum(&self, row: usize, upto: usize) -> f64 {
        self.row_prefix[row * (self.j_bins + 1) + upto]
    }

    fn cell(&self, j: usize, k: usize) -> f64 {
        let base = k * (self.j_bins + 1);
        self.row_prefix[base + j + 1] - self.row_prefix[base + j]
    }

    /// `theta . a` for the weights last passed to [`ShadedMasses::update`].
    pub fn mass(&self, info: &CensoringInfo) -> f64 {
        match info.region {
            Region::Marked { row, full, partial } => {
                let mut m = self.row_sum(row, full);
                if partial > 0.0 {
                    m += partial * self.cell(full, row);
                }
                m
            }
            Region::Unmarked { first, first_frac } => {
                if first >= self.j_bins {
                    0.0
                } else {
                    first_frac * self.col_mass[first] + self.col_tail[first + 1]
                }
            }
        }
    }

    /// Sum of log shaded masses; `-inf` if any vanishes.
    pub fn loglik(&self, infos: &[CensoringInfo]) -> f64 {
        let mut total = 0.0;
        for info in infos {
            let m = self.mass(info);
            if m <= 0.0 {
                return f64::NEG_INFINITY;
            }
            total += m.ln();
        }
        total
    }

    /// Draws a bin with probability proportional to `theta_l * a_l`, using
    /// two uniforms in `[0, 1)`. Returns `None` if the shaded mass is zero.
    pub fn sample_bin(&self, info: &CensoringInfo, u1: f64, u2: f64) -> Option<usize> {
        let jb = self.j_bins;
        match info.region {
            Region::Marked { row, full, partial } => {
                let head = self.row_sum(row, full);
                let tail = if partial > 0.0 {
                    partial * self.cell(full, row)
                } else {
                    0.0
                };
                let total = head + tail;
                if total <= 0.0 {
                    return None;
                }
                let target = u1 * total;
                let j = if target >= head && tail > 0.0 {
                    full
                } else {
                    let pre = &self.row_prefix[row * (jb + 1)..row * (jb + 1) + full + 1];
                    search(pre, target)
                };
                Some(row * jb + j)
            }
            Region::Unmarked { first, first_frac } => {
                if first >= jb {
                    return None;
                }
                let head = first_frac * self.col_mass[first];
                let total = head + self.col_tail[first + 1];
                if total <= 0.0 {
                    return None;
                }
                let target = u1 * total;
                let j = if target < head || self.col_tail[first + 1] <= 0.0 {
                    first
                } else {
                    let shifted = self.col_cum[first + 1] + (target - head);
                    first + 1 + search(&self.col_cum[first + 1..], shifted)
                };
                let pre = &self.col_prefix[j * (self.k_bins + 1)..(j + 1) * (self.k_bins + 1)];
                let k = search(pre, u2 * pre[self.k_bins]);
                Some(k * jb + j)
            }
        }
    }
}

/// Index `i` with `prefix[i] <= target < prefix[i + 1]`, skipping zero-width
/// intervals. `prefix` is nondecreasing with at least two entries and a
/// positive last increment somewhere.
fn search(prefix: &[f64], target: f64) -> usize {
    let n = prefix.len() - 1;
    let mut i = prefix[1..].partition_point(|&v| v <= target).min(n - 1);
    while i > 0 && prefix[i + 1] <= prefix[i] {
        i -= 1;
    }
    while i + 1 < n && prefix[i + 1] <= prefix[i] {
        i += 1;
    }
    i
}

/// Density `s_f(t, z)` of one observation with respect to Lebesgue measure
/// on `z > 0` plus counting-line measure on `z = 0`, for the
/// piecewise-constant `f` given by `w`. Computed from the density and
/// distribution function directly, independent of the shading code.
pub fn mu_density<G>(grid: &GridSpec, w: &BinWeights, g: G, t: f64, z: f64) -> Result<f64>
where
    G: Fn(f64) -> f64,
{
    Observation::new(t, z).validate(grid)?;
    let inner = if z > 0.0 {
        // d/dz F(t, z) = int_0^t f(u, z) du, exact over the columns.
        let dx = grid.dx();
        let mut s = 0.0;
        for j in 0..grid.j_bins() {
            let overlap = (t - j as f64 * dx).clamp(0.0, dx);
            if overlap > 0.0 {
                let x_mid = (j as f64 + 0.5) * dx;
                s += density_at(grid, w, x_mid, z)? * overlap;
            }
        }
        s
    } else {
        1.0 - cdf_at(grid, w, t, grid.m2())?
    };
    Ok(g(t) * inner)
}

const GL_NODES: [f64; 8] = [
    -0.960_289_856_497_536_2,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_2,
];
const GL_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_26,
    0.222_381_034_453_374_47,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_47,
    0.101_228_536_290_376_26,
];

fn gauss_legendre<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let (mid, half) = ((a + b) / 2.0, (b - a) / 2.0);
    GL_NODES
        .iter()
        .zip(&GL_WEIGHTS)
        .map(|(x, w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

/// `int_0^m1 g(t) |c(t)| dt` for `c` linear on each column with
/// `c(j dx) = start[j]` and slope `incr[j] / dx`.
fn integrate_abs_piecewise_linear<G: Fn(f64) -> f64>(
    g: &G,
    dx: f64,
    start: &[f64],
    incr: &[f64],
) -> f64 {
    let mut total = 0.0;
    for (j, (&a, &b)) in start.iter().zip(incr).enumerate() {
        let x0 = j as f64 * dx;
        let lin = |t: f64| a + b * (t - x0) / dx;
        let end = a + b;
        let piece = |lo: f64, hi: f64| gauss_legendre(|t| g(t) * lin(t).abs(), lo, hi);
        if a * end < 0.0 {
            let root = x0 + dx * (-a / b);
            total += piece(x0, root) + piece(root, x0 + dx);
        } else {
            total += piece(x0, x0 + dx);
        }
    }
    total
}

/// `L1(mu)` distance between the observation densities induced by two
/// weight vectors under inspection-time density `g`.
pub fn l1_mu_distance<G>(grid: &GridSpec, w1: &BinWeights, w2: &BinWeights, g: G) -> Result<f64>
where
    G: Fn(f64) -> f64,
{
    w1.check_grid(grid)?;
    w2.check_grid(grid)?;
    let (jb, kb) = (grid.j_bins(), grid.k_bins());
    let diff: Vec<f64> = w1
        .as_slice()
        .iter()
        .zip(w2.as_slice())
        .map(|(a, b)| a - b)
        .collect();
    let dx = grid.dx();
    let mut total = 0.0;

    // z > 0 sheet: within row k the mark density difference is
    // sum_j diff_kj * frac_j(t) / dy, constant in z over the row height dy.
    for k in 0..kb {
        let row = &diff[k * jb..(k + 1) * jb];
        let mut start = Vec::with_capacity(jb);
        let mut s = 0.0;
        for &d in row {
            start.push(s);
            s += d;
        }
        total += integrate_abs_piecewise_linear(&g, dx, &start, row);
    }

    // z = 0 line: survival difference equals -(F1_X - F2_X).
    let col: Vec<f64> = (0..jb)
        .map(|j| (0..kb).map(|k| diff[k * jb + j]).sum())
        .collect();
    let mut start = Vec::with_capacity(jb);
    let mut s = 0.0;
    for &d in &col {
        start.push(s);
        s += d;
    }
    total += integrate_abs_piecewise_linear(&g, dx, &start, &col);
    Ok(total)
}
