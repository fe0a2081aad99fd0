//! Covariance kernels, grid covariance matrices and exact Gaussian sampling.
//!
//! Sampling uses one master seed. Sample number `k` draws all of its normals
//! from a ChaCha8 stream seeded with the master seed and positioned on stream
//! `k` (see [`substream`]), so the output does not depend on how samples are
//! scheduled across worker threads.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lift::{SamplePath, TimeGrid};

/// Eigenvalues down to `-PSD_TOL * max(1, λ_max)` are accepted as zero.
pub const PSD_TOL: f64 = 1e-10;

/// A covariance kernel tabulated on a grid, bilinearly interpolated between nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct TableKernel {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl TableKernel {
    /// `values` is the row-major `(n+1) x (n+1)` table `R(t_i, t_j)`.
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        let n = grid.num_nodes();
        if values.len() != n * n {
            return Err(Error::input(format!("table needs {} entries, got {}", n * n, values.len())));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    fn node(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.num_nodes() + j]
    }

    fn eval(&self, s: f64, t: f64) -> Option<f64> {
        let times = self.grid.times();
        let (a, b) = (self.grid.segment_of(s)?, self.grid.segment_of(t)?);
        let u = (s - times[a]) / (times[a + 1] - times[a]);
        let v = (t - times[b]) / (times[b + 1] - times[b]);
        Some(
            (1.0 - u) * (1.0 - v) * self.node(a, b)
                + (1.0 - u) * v * self.node(a, b + 1)
                + u * (1.0 - v) * self.node(a + 1, b)
                + u * v * self.node(a + 1, b + 1),
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum CovKernel {
    Brownian,
    Fbm { hurst: f64 },
    Table(TableKernel),
}

impl CovKernel {
    pub fn fbm(hurst: f64) -> Result<Self> {
        if !(hurst > 0.0 && hurst < 1.0) {
            return Err(Error::input(format!("Hurst parameter must lie in (0,1), got {hurst}")));
        }
        Ok(CovKernel::Fbm { hurst })
    }

    pub fn name(&self) -> &'static str {
        match self {
            CovKernel::Brownian => "brownian",
            CovKernel::Fbm { .. } => "fbm",
            CovKernel::Table(_) => "table",
        }
    }

    /// Hurst parameter; 1/2 for Brownian motion, `None` for tables.
    pub fn hurst(&self) -> Option<f64> {
        match self {
            CovKernel::Brownian => Some(0.5),
            CovKernel::Fbm { hurst } => Some(*hurst),
            CovKernel::Table(_) => None,
        }
    }

    /// Variation exponent of the covariance, `max(1, 1/(2H))`.
    pub fn rho(&self) -> Option<f64> {
        self.hurst().map(|h| (1.0 / (2.0 * h)).max(1.0))
    }

    /// `R(s,t)` for `s, t` in `[0,1]`.
    pub fn eval(&self, s: f64, t: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&s) || !(0.0..=1.0).contains(&t) {
            return Err(Error::input(format!("kernel times ({s}, {t}) outside [0,1]")));
        }
        Ok(match self {
            CovKernel::Brownian => s.min(t),
            CovKernel::Fbm { hurst } => {
                let h2 = 2.0 * hurst;
                0.5 * (s.powf(h2) + t.powf(h2) - (t - s).abs().powf(h2))
            }
            CovKernel::Table(table) => table.eval(s, t).expect("times checked above"),
        })
    }
}

/// Symmetric positive semi-definite covariance of a process on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct CovMatrix {
    grid: TimeGrid,
    entries: Vec<f64>,
}

impl CovMatrix {
    /// Validates symmetry and positive semi-definiteness.
    pub fn new(grid: TimeGrid, entries: Vec<f64>) -> Result<Self> {
        let m = Self::from_parts(grid, entries)?;
        let n = m.num_nodes();
        let scale = m.entries.iter().fold(1.0f64, |acc, x| acc.max(x.abs()));
        for i in 0..n {
            for j in 0..i {
                if (m.get(i, j) - m.get(j, i)).abs() > 1e-12 * scale {
                    return Err(Error::input(format!("covariance is not symmetric at ({i}, {j})")));
                }
            }
        }
        let (min, max) = m.eigen_range();
        if min < -PSD_TOL * max.abs().max(1.0) {
            return Err(Error::NotPositiveSemiDefinite(min));
        }
        Ok(m)
    }

    pub(crate) fn from_parts(grid: TimeGrid, entries: Vec<f64>) -> Result<Self> {
        let n = grid.num_nodes();
        if entries.len() != n * n {
            return Err(Error::input(format!("covariance needs {} entries, got {}", n * n, entries.len())));
        }
        Ok(Self { grid, entries })
    }

    pub fn zeros(grid: TimeGrid) -> Self {
        let n = grid.num_nodes();
        Self { grid, entries: vec![0.0; n * n] }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn num_nodes(&self) -> usize {
        self.grid.num_nodes()
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.num_nodes() + j]
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        let n = self.num_nodes();
        DMatrix::from_row_slice(n, n, &self.entries)
    }

    /// Smallest and largest eigenvalue.
    pub fn eigen_range(&self) -> (f64, f64) {
        let eig = self.to_dmatrix().symmetric_eigenvalues();
        let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (min, max)
    }

    /// `E[X_{a,b} X_{c,d}] = R(b,d) - R(b,c) - R(a,d) + R(a,c)`.
    pub fn rect_increment(&self, a: usize, b: usize, c: usize, d: usize) -> Result<f64> {
        if a > b || c > d {
            return Err(Error::IndexOrder(format!("rectangle [{a},{b}]x[{c},{d}]")));
        }
        let n = self.num_nodes();
        if b >= n || d >= n {
            return Err(Error::input("rectangle corner out of range"));
        }
        Ok(self.rect(a, b, c, d))
    }

    #[inline]
    pub(crate) fn rect(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        self.get(b, d) - self.get(b, c) - self.get(a, d) + self.get(a, c)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| a + b).collect();
        Ok(Self { grid: self.grid.clone(), entries })
    }

    pub fn frobenius_distance(&self, other: &Self) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Covariance matrix `R(t_i, t_j)` of a kernel on a grid.
pub fn cov_matrix(kernel: &CovKernel, grid: &TimeGrid) -> Result<CovMatrix> {
    let times = grid.times();
    let mut entries = Vec::with_capacity(times.len() * times.len());
    for &s in times {
        for &t in times {
            entries.push(kernel.eval(s, t)?);
        }
    }
    CovMatrix::new(grid.clone(), entries)
}

/// Random stream for sample `index` under `seed`.
pub fn substream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let chunks = n / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..n {
        s += a[i] * b[i];
    }
    s
}

/// Lower-triangular factor of the non-degenerate block of a covariance,
/// stored as packed rows.
#[derive(Clone, Debug)]
struct PackedCholesky {
    size: usize,
    rows: Vec<f64>,
}

impl PackedCholesky {
    fn row(&self, i: usize) -> &[f64] {
        let start = i * (i + 1) / 2;
        &self.rows[start..start + i + 1]
    }

    /// Cholesky-Banachiewicz; pivots that vanish (up to `1e-12 * trace`) are
    /// replaced by that jitter.
    fn factor(block: &[f64], size: usize) -> Result<Self> {
        let trace: f64 = (0..size).map(|i| block[i * size + i]).sum();
        let jitter = 1e-12 * trace;
        let neg_tol = PSD_TOL * trace.max(1.0);
        let mut rows = vec![0.0; size * (size + 1) / 2];
        for i in 0..size {
            let row_i = i * (i + 1) / 2;
            for k in 0..=i {
                let row_k = k * (k + 1) / 2;
                let s = dot(&rows[row_i..row_i + k], &rows[row_k..row_k + k]);
                let v = block[i * size + k] - s;
                if k == i {
                    if v < -neg_tol {
                        return Err(Error::Factorization(format!("negative pivot {v:e} at {i}")));
                    }
                    rows[row_i + i] = if v <= jitter { (v.max(0.0) + jitter).sqrt() } else { v.sqrt() };
                } else {
                    rows[row_i + k] = v / rows[row_k + k];
                }
            }
        }
        Ok(Self { size, rows })
    }
}

/// Draws `d` independent components, each `N(0, R)`, by Cholesky factorisation.
#[derive(Clone, Debug)]
pub struct GaussianSampler {
    grid: TimeGrid,
    dim: usize,
    seed: u64,
    active: Vec<usize>,
    factor: PackedCholesky,
}

impl GaussianSampler {
    /// Nodes with zero variance (e.g. `t = 0`) are excluded from the
    /// factorisation and sampled as exact zeros.
    pub fn new(cov: &CovMatrix, dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::input("need at least one component"));
        }
        let n = cov.num_nodes();
        let active: Vec<usize> = (0..n).filter(|&i| cov.get(i, i) > 0.0).collect();
        let m = active.len();
        let mut block = Vec::with_capacity(m * m);
        for &i in &active {
            for &j in &active {
                block.push(cov.get(i, j));
            }
        }
        let factor = PackedCholesky::factor(&block, m)?;
        Ok(Self { grid: cov.grid().clone(), dim, seed, active, factor })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Sample number `index`; deterministic in `(seed, index)`.
    pub fn draw(&self, index: u64) -> SamplePath {
        let mut rng = substream(self.seed, index);
        let n = self.grid.num_nodes();
        let m = self.factor.size;
        let mut normals = vec![0.0; m];
        let values = (0..self.dim)
            .map(|_| {
                for z in normals.iter_mut() {
                    *z = StandardNormal.sample(&mut rng);
                }
                let mut v = vec![0.0; n];
                for (r, &node) in self.active.iter().enumerate() {
                    v[node] = dot(self.factor.row(r), &normals[..=r]);
                }
                v
            })
            .collect();
        SamplePath::new(self.grid.clone(), values).expect("shape matches grid")
    }
}

/// `count` independent samples with `d` i.i.d. components of covariance `R`.
pub fn sample(cov: &CovMatrix, dim: usize, count: usize, seed: u64) -> Result<Vec<SamplePath>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    let sampler = GaussianSampler::new(cov, dim, seed)?;
    Ok((0..count as u64).into_par_iter().map(|k| sampler.draw(k)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fbm_kernel_cases() {
        let bm = CovKernel::Brownian;
        let half = CovKernel::fbm(0.5).unwrap();
        for &(s, t) in &[(0.2, 0.7), (0.9, 0.1), (0.5, 0.5), (0.0, 1.0)] {
            assert!((half.eval(s, t).unwrap() - bm.eval(s, t).unwrap()).abs() < 1e-15);
        }
        for h in [0.1, 0.35, 0.5, 0.8] {
            let k = CovKernel::fbm(h).unwrap();
            assert!((k.eval(1.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
            assert!((k.eval(0.3, 0.3).unwrap() - 0.3f64.powf(2.0 * h)).abs() < 1e-15);
        }
        assert!(CovKernel::fbm(1.0).is_err());
        assert!(CovKernel::fbm(0.0).is_err());
        assert!(bm.eval(-0.1, 0.5).is_err());
        assert!(bm.eval(0.5, 1.2).is_err());
    }

    #[test]
    fn brownian_matrix_three_nodes() {
        let grid = TimeGrid::uniform(2).unwrap();
        let r = cov_matrix(&CovKernel::Brownian, &grid).unwrap();
        assert_eq!(r.entries(), &[0.0, 0.0, 0.0, 0.0, 0.5, 0.5, 0.0, 0.5, 1.0]);
        let f = cov_matrix(&CovKernel::fbm(0.5).unwrap(), &grid).unwrap();
        assert!(r.frobenius_distance(&f) < 1e-15);
    }

    #[test]
    fn table_roundtrip_at_nodes() {
        let grid = TimeGrid::new(vec![0.0, 0.3, 0.55, 1.0]).unwrap();
        let bm = cov_matrix(&CovKernel::Brownian, &grid).unwrap();
        let table = CovKernel::Table(TableKernel::new(grid.clone(), bm.entries().to_vec()).unwrap());
        let again = cov_matrix(&table, &grid).unwrap();
        assert_eq!(again.entries(), bm.entries());
        // bilinear between nodes
        let mid = table.eval(0.15, 0.3).unwrap();
        assert!((mid - 0.15).abs() < 1e-15);
    }

    #[test]
    fn rejects_indefinite_table() {
        let grid = TimeGrid::uniform(1).unwrap();
        let err = CovMatrix::new(grid.clone(), vec![1.0, 2.0, 2.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::NotPositiveSemiDefinite(_)));
        assert!(CovMatrix::new(grid, vec![1.0, 0.5, 0.4, 1.0]).is_err());
    }

    #[test]
    fn rect_increment_brownian() {
        let grid = TimeGrid::uniform(8).unwrap();
        let r = cov_matrix(&CovKernel::Brownian, &grid).unwrap();
        assert_eq!(r.rect_increment(3, 3, 1, 6).unwrap(), 0.0);
        assert!((r.rect_increment(2, 5, 2, 5).unwrap() - 3.0 / 8.0).abs() < 1e-15);
        assert!(r.rect_increment(1, 3, 4, 7).unwrap().abs() < 1e-15);
        assert!(matches!(r.rect_increment(3, 2, 0, 1), Err(Error::IndexOrder(_))));
    }

    #[test]
    fn sampling_edge_cases() {
        let grid = TimeGrid::uniform(4).unwrap();
        let r = cov_matrix(&CovKernel::Brownian, &grid).unwrap();
        assert!(sample(&r, 2, 0, 7).unwrap().is_empty());
        let zero = CovMatrix::zeros(grid);
        for path in sample(&zero, 3, 5, 1).unwrap() {
            assert!(path.components().iter().flatten().all(|&x| x == 0.0));
        }
        let a = sample(&r, 2, 3, 11).unwrap();
        let b = sample(&r, 2, 3, 11).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|p| p.component(0)[0] == 0.0 && p.component(1)[0] == 0.0));
    }

    #[test]
    fn singular_block_factorises() {
        // rank-one covariance on the non-degenerate nodes
        let grid = TimeGrid::uniform(3).unwrap();
        let h = [0.0, 1.0, 2.0, 3.0];
        let entries: Vec<f64> = h.iter().flat_map(|a| h.iter().map(move |b| a * b)).collect();
        let r = CovMatrix::new(grid, entries).unwrap();
        let s = GaussianSampler::new(&r, 1, 3).unwrap();
        let x = s.draw(0);
        let c = x.component(0);
        assert!((c[2] - 2.0 * c[1]).abs() < 1e-4);
    }
}
