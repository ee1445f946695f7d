//! Grid graph Laplacian, the precision `L + p^-2 I` built on it, and the
//! whitening map from standard-normal coordinates to bin weights.
//!
//! With the row-major bin ordering every neighbour of node `l` lies within
//! `J` positions of it, so the precision matrix is banded with half-bandwidth
//! `J` and its Cholesky factor keeps the same band.

use crate::error::{Error, Result};
use crate::grid::{BinWeights, GridSpec};

/// Symmetric sparse matrix in compressed-row form.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseSym {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseSym {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n * self.n];
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                out[i * self.n + j] = v;
            }
        }
        out
    }
}

/// Upper-triangular band factor `U` with `A = U^T U`.
///
/// Row `i` stores `U[i][i..=i + bw]`.
#[derive(Clone, Debug)]
pub struct BandedUpper {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandedUpper {
    /// Band Cholesky of the symmetric matrix `a` with half-bandwidth `bw`.
    pub fn factor(a: &SparseSym, bw: usize) -> Result<Self> {
        let n = a.dim();
        let w = bw + 1;
        let mut data = vec![0.0; n * w];
        for i in 0..n {
            for (j, v) in a.row(i) {
                if j >= i {
                    if j - i > bw {
                        return Err(Error::InvalidArgument(format!(
                            "entry ({i}, {j}) outside half-bandwidth {bw}"
                        )));
                    }
                    data[i * w + (j - i)] = v;
                }
            }
        }
        // Right-looking elimination confined to the band.
        for i in 0..n {
            let d = data[i * w];
            if !d.is_finite() || d <= 0.0 {
                return Err(Error::Numerical(format!(
                    "matrix not positive definite at pivot {i} (value {d})"
                )));
            }
            let piv = d.sqrt();
            data[i * w] = piv;
            let last = (i + bw).min(n - 1);
            for j in i + 1..=last {
                data[i * w + (j - i)] /= piv;
            }
            for j in i + 1..=last {
                let uij = data[i * w + (j - i)];
                if uij == 0.0 {
                    continue;
                }
                for k in j..=last {
                    let uik = data[i * w + (k - i)];
                    data[j * w + (k - j)] -= uij * uik;
                }
            }
        }
        Ok(Self { n, bw, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j < i || j - i > self.bw {
            0.0
        } else {
            self.data[i * (self.bw + 1) + (j - i)]
        }
    }

    /// Solves `U x = b` in place by back substitution.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let w = self.bw + 1;
        for i in (0..self.n).rev() {
            let row = &self.data[i * w..(i + 1) * w];
            let last = (i + self.bw).min(self.n - 1);
            let mut s = x[i];
            for j in i + 1..=last {
                s -= row[j - i] * x[j];
            }
            x[i] = s / row[0];
        }
    }
}

/// Graph Laplacian of the 4-neighbour bin graph with its precision matrix
/// and Cholesky factor.
#[derive(Clone, Debug)]
pub struct GridLaplacian {
    grid: GridSpec,
    l: SparseSym,
    shift: f64,
    upsilon: Option<SparseSym>,
    chol_upper: Option<BandedUpper>,
}

/// Laplacian of the grid graph: node degree on the diagonal, `-1` between
/// horizontally or vertically adjacent bins.
pub fn build_laplacian(grid: &GridSpec) -> GridLaplacian {
    let (jb, kb) = (grid.j_bins(), grid.k_bins());
    let p = grid.p();
    let mut row_ptr = Vec::with_capacity(p + 1);
    let mut cols = Vec::with_capacity(5 * p);
    let mut vals = Vec::with_capacity(5 * p);
    row_ptr.push(0);
    for l in 0..p {
        let (j, k) = grid.coords_of(l);
        let mut nbrs = Vec::with_capacity(4);
        if k > 0 {
            nbrs.push(l - jb);
        }
        if j > 0 {
            nbrs.push(l - 1);
        }
        if j + 1 < jb {
            nbrs.push(l + 1);
        }
        if k + 1 < kb {
            nbrs.push(l + jb);
        }
        let degree = nbrs.len() as f64;
        // Columns in increasing order.
        for &n in nbrs.iter().filter(|&&n| n < l) {
            cols.push(n);
            vals.push(-1.0);
        }
        cols.push(l);
        vals.push(degree);
        for &n in nbrs.iter().filter(|&&n| n > l) {
            cols.push(n);
            vals.push(-1.0);
        }
        row_ptr.push(cols.len());
    }
    GridLaplacian {
        grid: *grid,
        l: SparseSym {
            n: p,
            row_ptr,
            cols,
            vals,
        },
        shift: 1.0 / (p as f64 * p as f64),
        upsilon: None,
        chol_upper: None,
    }
}

/// Adds `p^-2 I` to the Laplacian and factors the result once.
pub fn build_precision(mut lap: GridLaplacian) -> Result<GridLaplacian> {
    let mut ups = lap.l.clone();
    for i in 0..ups.n {
        for idx in ups.row_ptr[i]..ups.row_ptr[i + 1] {
            if ups.cols[idx] == i {
                ups.vals[idx] += lap.shift;
            }
        }
    }
    let bw = if lap.grid.k_bins() > 1 {
        lap.grid.j_bins()
    } else {
        1.min(lap.grid.p() - 1)
    };
    let chol = BandedUpper::factor(&ups, bw)
        .map_err(|e| Error::Numerical(format!("precision factorisation failed: {e}")))?;
    lap.upsilon = Some(ups);
    lap.chol_upper = Some(chol);
    Ok(lap)
}

impl GridLaplacian {
    /// Laplacian, precision and factor for `grid` in one call.
    pub fn new(grid: &GridSpec) -> Result<Self> {
        build_precision(build_laplacian(grid))
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn p(&self) -> usize {
        self.l.n
    }

    pub fn laplacian(&self) -> &SparseSym {
        &self.l
    }

    /// The diagonal shift `p^-2`.
    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn precision(&self) -> Option<&SparseSym> {
        self.upsilon.as_ref()
    }

    pub fn chol_upper(&self) -> Option<&BandedUpper> {
        self.chol_upper.as_ref()
    }

    fn factor(&self) -> Result<&BandedUpper> {
        self.chol_upper
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("precision matrix not factored yet".into()))
    }

    /// `U^{-1} z`: a draw from `N(0, Upsilon^{-1})` when `z` is standard normal.
    pub fn whiten(&self, zvec: &[f64], out: &mut [f64]) -> Result<()> {
        if zvec.len() != self.p() || out.len() != self.p() {
            return Err(Error::InvalidArgument(format!(
                "latent vector of length {} for {} bins",
                zvec.len(),
                self.p()
            )));
        }
        out.copy_from_slice(zvec);
        self.factor()?.solve_in_place(out);
        Ok(())
    }

    /// Cheap runtime checks of the structural and spectral facts the prior
    /// relies on: zero row sums, unit off-diagonals, degrees in `1..=4`, a
    /// Gershgorin bound `lambda_max(L) <= 8`, and `L 1 = 0` so that `p^-2`
    /// is the smallest eigenvalue of the precision matrix.
    pub fn check_invariants(&self) -> Result<()> {
        let mut gershgorin: f64 = 0.0;
        for i in 0..self.p() {
            let mut sum = 0.0;
            let mut radius = 0.0;
            let mut diag = 0.0;
            for (j, v) in self.l.row(i) {
                sum += v;
                if j == i {
                    diag = v;
                } else {
                    if v != -1.0 {
                        return Err(Error::Numerical(format!(
                            "off-diagonal L[{i}][{j}] = {v}"
                        )));
                    }
                    if self.l.get(j, i) != v {
                        return Err(Error::Numerical(format!("L not symmetric at ({i}, {j})")));
                    }
                    radius += v.abs();
                }
            }
            if sum != 0.0 {
                return Err(Error::Numerical(format!("row {i} of L sums to {sum}")));
            }
            if self.p() > 1 && !(1.0..=4.0).contains(&diag) {
                return Err(Error::Numerical(format!("node {i} has degree {diag}")));
            }
            gershgorin = gershgorin.max(diag + radius);
        }
        if gershgorin > 8.0 {
            return Err(Error::Numerical(format!(
                "Gershgorin bound {gershgorin} exceeds 8"
            )));
        }
        Ok(())
    }

    /// Bin weights `softmax(U^{-1} z sqrt(tau))`.
    pub fn theta_from_latent(&self, zvec: &[f64], tau: f64) -> Result<BinWeights> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "smoothing scale must be positive, got {tau}"
            )));
        }
        let mut h = vec![0.0; self.p()];
        self.whiten(zvec, &mut h)?;
        let mut theta = vec![0.0; self.p()];
        softmax_scaled(&h, tau.sqrt(), &mut theta);
        Ok(BinWeights::from_vec_unchecked(theta))
    }
}

/// Free-function form of [`GridLaplacian::theta_from_latent`].
pub fn theta_from_latent(lap: &GridLaplacian, zvec: &[f64], tau: f64) -> Result<BinWeights> {
    lap.theta_from_latent(zvec, tau)
}

/// `out = softmax(scale * h)` with the max-shift.
pub fn softmax_scaled(h: &[f64], scale: f64, out: &mut [f64]) {
    let max = h.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v * scale));
    let mut sum = 0.0;
    for (o, &v) in out.iter_mut().zip(h) {
        *o = (v * scale - max).exp();
        sum += *o;
    }
    let inv = 1.0 / sum;
    out.iter_mut().for_each(|o| *o *= inv);
}

pub fn softmax(h: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; h.len()];
    softmax_scaled(h, 1.0, &mut out);
    out
}
