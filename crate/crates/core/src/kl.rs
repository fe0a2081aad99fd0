//! Karhunen-Loève expansion on a grid, conditional projections `X^A` and the
//! conditional-expectation identities for the lifted projections.
//!
//! Basis directions are indexed from 0 in decreasing eigenvalue order, so the
//! prefix set `A_m` is `IndexSet::prefix(m)`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gaussian::{substream, CovMatrix, PSD_TOL};
use crate::lift::{segment_signature, young_integral_quadratic, SamplePath, TimeGrid};
use crate::tensor::{GroupElement, LieElement, TensorElement};

/// Eigenvalues below `EIGEN_CLIP * λ_max` are dropped from the basis.
pub const EIGEN_CLIP: f64 = 1e-10;

/// Eigenpairs of a grid covariance, `h_k = sqrt(λ_k) φ_k`, descending `λ_k`.
#[derive(Clone, Debug)]
pub struct KlBasis {
    grid: TimeGrid,
    eigenvalues: Vec<f64>,
    phis: Vec<Vec<f64>>,
    hs: Vec<Vec<f64>>,
}

/// Symmetric eigendecomposition of `cov`, truncated to its numerical rank.
pub fn kl_decompose(cov: &CovMatrix) -> Result<KlBasis> {
    let n = cov.num_nodes();
    let eig = cov.to_dmatrix().symmetric_eigen();
    let lambda_max = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let lambda_min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if lambda_min < -PSD_TOL * lambda_max.max(1.0) {
        return Err(Error::NotPositiveSemiDefinite(lambda_min));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut eigenvalues = Vec::new();
    let mut phis = Vec::new();
    let mut hs = Vec::new();
    for k in order {
        let lambda = eig.eigenvalues[k];
        if !(lambda > EIGEN_CLIP * lambda_max) {
            break;
        }
        let mut phi: Vec<f64> = eig.eigenvectors.column(k).iter().cloned().collect();
        // fix the sign: largest entry positive
        let pivot = phi.iter().cloned().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if pivot < 0.0 {
            phi.iter_mut().for_each(|x| *x = -*x);
        }
        let root = lambda.sqrt();
        hs.push(phi.iter().map(|x| root * x).collect());
        phis.push(phi);
        eigenvalues.push(lambda);
    }
    Ok(KlBasis { grid: cov.grid().clone(), eigenvalues, phis, hs })
}

impl KlBasis {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Euclidean-orthonormal eigenvector `φ_k`.
    pub fn phi(&self, k: usize) -> &[f64] {
        &self.phis[k]
    }

    /// Cameron-Martin basis vector `h_k = sqrt(λ_k) φ_k`.
    pub fn h(&self, k: usize) -> &[f64] {
        &self.hs[k]
    }

    /// Coordinates `Z_k = φ_k·x / sqrt(λ_k)`.
    pub fn coefficients(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.grid.num_nodes() {
            return Err(Error::GridMismatch);
        }
        Ok(self
            .phis
            .iter()
            .zip(&self.eigenvalues)
            .map(|(phi, lambda)| crate::gaussian::dot(phi, x) / lambda.sqrt())
            .collect())
    }

    fn check_set(&self, set: &IndexSet) -> Result<()> {
        match set.indices.last() {
            Some(&k) if k >= self.rank() => Err(Error::input(format!(
                "index {k} outside basis of rank {}",
                self.rank()
            ))),
            _ => Ok(()),
        }
    }

    /// `Σ_{k∈A} z_k h_k`.
    pub fn combine(&self, z: &[f64], set: &IndexSet) -> Result<Vec<f64>> {
        self.check_set(set)?;
        if z.len() < self.rank() {
            return Err(Error::input("coefficient vector shorter than the basis"));
        }
        let mut out = vec![0.0; self.grid.num_nodes()];
        for &k in set.iter() {
            for (o, h) in out.iter_mut().zip(&self.hs[k]) {
                *o += z[k] * h;
            }
        }
        Ok(out)
    }

    /// Covariance `R^A = Σ_{k∈A} h_k h_k^T` of the projection onto `A`.
    pub fn partial_cov(&self, set: &IndexSet) -> Result<CovMatrix> {
        self.check_set(set)?;
        let n = self.grid.num_nodes();
        let mut entries = vec![0.0; n * n];
        for &k in set.iter() {
            let h = &self.hs[k];
            for i in 0..n {
                if h[i] == 0.0 {
                    continue;
                }
                let row = &mut entries[i * n..(i + 1) * n];
                for (e, hj) in row.iter_mut().zip(h) {
                    *e += h[i] * hj;
                }
            }
        }
        CovMatrix::from_parts(self.grid.clone(), entries)
    }
}

/// A finite set of basis indices (0-based, sorted).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IndexSet {
    indices: Vec<usize>,
}

impl IndexSet {
    pub fn empty() -> Self {
        Self::default()
    }

    /// `{0, ..., rank-1}`.
    pub fn full(rank: usize) -> Self {
        Self::range(0, rank)
    }

    /// The first `m` directions.
    pub fn prefix(m: usize) -> Self {
        Self::range(0, m)
    }

    /// `{lo, ..., hi-1}`.
    pub fn range(lo: usize, hi: usize) -> Self {
        Self { indices: (lo..hi).collect() }
    }

    pub fn from_indices(indices: impl IntoIterator<Item = usize>) -> Self {
        let mut indices: Vec<usize> = indices.into_iter().collect();
        indices.sort_unstable();
        indices.dedup();
        Self { indices }
    }

    /// Each of `0..rank` included independently with probability 1/2.
    pub fn random<R: Rng + ?Sized>(rank: usize, rng: &mut R) -> Self {
        Self { indices: (0..rank).filter(|_| rng.random_bool(0.5)).collect() }
    }

    /// Complement within `0..rank`.
    pub fn complement(&self, rank: usize) -> Self {
        Self { indices: (0..rank).filter(|k| self.indices.binary_search(k).is_err()).collect() }
    }

    /// Restriction to `0..rank`.
    pub fn clamp(&self, rank: usize) -> Self {
        Self { indices: self.indices.iter().cloned().filter(|&k| k < rank).collect() }
    }

    pub fn contains(&self, k: usize) -> bool {
        self.indices.binary_search(&k).is_ok()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &usize> {
        self.indices.iter()
    }
}

fn check_bases(x: &SamplePath, bases: &[KlBasis]) -> Result<()> {
    if bases.len() != x.dim() {
        return Err(Error::DimensionMismatch(x.dim(), bases.len()));
    }
    if bases.iter().any(|b| b.grid() != x.grid()) {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

/// KL coefficients of every component of `x`.
pub fn coefficients(x: &SamplePath, bases: &[KlBasis]) -> Result<Vec<Vec<f64>>> {
    check_bases(x, bases)?;
    bases.iter().zip(x.components()).map(|(b, xi)| b.coefficients(xi)).collect()
}

/// Conditional projection `X^A = Σ_{k∈A} Z_k h_k`, componentwise.
pub fn project(x: &SamplePath, bases: &[KlBasis], set: &IndexSet) -> Result<SamplePath> {
    let z = coefficients(x, bases)?;
    project_coefficients(&z, bases, set)
}

/// `Σ_{k∈A} z^i_k h^i_k` for precomputed coefficients.
pub fn project_coefficients(z: &[Vec<f64>], bases: &[KlBasis], set: &IndexSet) -> Result<SamplePath> {
    if z.len() != bases.len() || bases.is_empty() {
        return Err(Error::DimensionMismatch(z.len(), bases.len()));
    }
    let values = bases
        .iter()
        .zip(z)
        .map(|(b, zi)| b.combine(zi, set))
        .collect::<Result<Vec<_>>>()?;
    SamplePath::new(bases[0].grid().clone(), values)
}

/// `Σ_{k,l∈A} Z^i_k Z^j_l ∫_0^t h^{i,k} dh^{j,l}`, the `(i,j)` entry of level 2
/// of the lifted projection at node `t`. Pairwise integrals of the
/// piecewise-linear basis paths use the (exact) trapezoid rule.
pub fn level2_double_sum(
    bases: &[KlBasis],
    z: &[Vec<f64>],
    set: &IndexSet,
    t: usize,
    i: usize,
    j: usize,
) -> Result<f64> {
    if i == j {
        return Err(Error::input("level-2 double sum needs i != j"));
    }
    let d = bases.len();
    if i >= d || j >= d || z.len() != d {
        return Err(Error::input("component index out of range"));
    }
    bases[i].check_set(set)?;
    bases[j].check_set(set)?;
    if t >= bases[i].grid().num_nodes() {
        return Err(Error::input(format!("node {t} out of range")));
    }
    let mut total = 0.0;
    for &k in set.iter() {
        let hk = bases[i].h(k);
        for &l in set.iter() {
            let hl = bases[j].h(l);
            let integral: f64 = (0..t)
                .map(|m| 0.5 * (hk[m] + hk[m + 1] - 2.0 * hk[0]) * (hl[m + 1] - hl[m]))
                .sum();
            total += z[i][k] * z[j][l] * integral;
        }
    }
    Ok(total)
}

/// Node values and segment-midpoint values of
/// `u ↦ R([u,t] x [s,u])` on `[t_s, t_t]`, with the covariance bilinearly
/// interpolated between nodes (zero outside the interval).
pub fn residual_integrand(cov: &CovMatrix, s: usize, t: usize) -> (Vec<f64>, Vec<f64>) {
    let n = cov.num_nodes();
    let r = |a: usize, b: usize| cov.get(a, b);
    let mut nodes = vec![0.0; n];
    let mut mids = vec![0.0; n - 1];
    for m in s..=t {
        nodes[m] = r(t, m) - r(t, s) - r(m, m) + r(m, s);
    }
    for m in s..t {
        let (a, b) = (m, m + 1);
        let r_t_mid = 0.5 * (r(t, a) + r(t, b));
        let r_mid_mid = 0.25 * (r(a, a) + r(a, b) + r(b, a) + r(b, b));
        let r_mid_s = 0.5 * (r(a, s) + r(b, s));
        mids[m] = r_t_mid - r(t, s) - r_mid_mid + r_mid_s;
    }
    (nodes, mids)
}

fn check_interval(grid: &TimeGrid, s: usize, t: usize) -> Result<()> {
    if s >= t {
        return Err(Error::IndexOrder(format!("need s < t, got ({s}, {t})")));
    }
    if t >= grid.num_nodes() {
        return Err(Error::input(format!("node {t} out of range")));
    }
    Ok(())
}

/// Exact level-3 gap `E(ln X_{s,t} | F_A) - ln X^A_{s,t}`:
///
/// `Σ_{i≠j} [ X^{A;j}_{s,t} R_i([s,t]^2)/12 - ½ ∫_s^t R_i([u,t]x[s,u]) dX^{A;j}_u ] [e_i,[e_i,e_j]]`
///
/// where `R_i` is the residual covariance `partial_cov(A^c)` of component `i`.
pub fn level3_correction(
    bases: &[KlBasis],
    set: &IndexSet,
    x_a: &SamplePath,
    s: usize,
    t: usize,
) -> Result<LieElement> {
    check_bases(x_a, bases)?;
    check_interval(x_a.grid(), s, t)?;
    let d = x_a.dim();
    let mut out = LieElement::zero(d, 3)?;
    let residuals = bases
        .iter()
        .map(|b| b.partial_cov(&set.clamp(b.rank()).complement(b.rank())))
        .collect::<Result<Vec<_>>>()?;
    for (i, res) in residuals.iter().enumerate() {
        let square = res.rect(s, t, s, t);
        let (f_nodes, f_mids) = residual_integrand(res, s, t);
        for j in (0..d).filter(|&j| j != i) {
            let xj = x_a.component(j);
            let integral = young_integral_quadratic(&f_nodes, &f_mids, x_a, j, s, t)?;
            let coeff = (xj[t] - xj[s]) * square / 12.0 - 0.5 * integral;
            if coeff != 0.0 {
                out = out.add(&LieElement::bracket_iij(i, j, d)?.scale(coeff))?;
            }
        }
    }
    Ok(out)
}

/// Monte Carlo mean of a Lie-algebra-valued statistic with per-coordinate
/// standard errors (same layout as the tensor coefficients).
#[derive(Clone, Debug)]
pub struct LieEstimate {
    pub mean: LieElement,
    pub stderr: TensorElement,
    pub samples: usize,
}

pub(crate) fn mean_and_stderr(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let m = rows.len();
    let width = rows[0].len();
    let mut mean = vec![0.0; width];
    for r in rows {
        for (a, x) in mean.iter_mut().zip(r) {
            *a += x;
        }
    }
    mean.iter_mut().for_each(|a| *a /= m as f64);
    let mut var = vec![0.0; width];
    for r in rows {
        for ((v, x), mu) in var.iter_mut().zip(r).zip(&mean) {
            *v += (x - mu) * (x - mu);
        }
    }
    let denom = (m.max(2) - 1) as f64 * m as f64;
    let se = var.iter().map(|v| (v / denom).sqrt()).collect();
    (mean, se)
}

/// Monte Carlo estimate of `E(ln X_{s,t} | F_A)`: residuals
/// `Σ_{k∉A} ξ_k h_k` with i.i.d. standard normal `ξ_k` are added to `x_a`
/// and the log-signature over `[t_s, t_t]` is averaged.
pub fn conditional_log_mc(
    bases: &[KlBasis],
    set: &IndexSet,
    x_a: &SamplePath,
    s: usize,
    t: usize,
    samples: usize,
    seed: u64,
) -> Result<LieEstimate> {
    check_bases(x_a, bases)?;
    check_interval(x_a.grid(), s, t)?;
    if samples == 0 {
        return Err(Error::input("Monte Carlo needs at least one sample"));
    }
    let d = x_a.dim();
    let complements: Vec<IndexSet> = bases
        .iter()
        .map(|b| set.clamp(b.rank()).complement(b.rank()))
        .collect();
    let rows: Vec<Vec<f64>> = (0..samples as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = substream(seed, k);
            let mut values: Vec<Vec<f64>> = (0..d).map(|i| x_a.component(i)[s..=t].to_vec()).collect();
            for (i, b) in bases.iter().enumerate() {
                for &c in complements[i].iter() {
                    let xi: f64 = StandardNormal.sample(&mut rng);
                    for (v, h) in values[i].iter_mut().zip(&b.h(c)[s..=t]) {
                        *v += xi * h;
                    }
                }
            }
            let mut sig = GroupElement::identity(d, 3).expect("valid shape");
            let mut dx = vec![0.0; d];
            for l in 0..t - s {
                for i in 0..d {
                    dx[i] = values[i][l + 1] - values[i][l];
                }
                let seg = segment_signature(&dx, 3).expect("valid shape");
                sig = sig.mul(&seg).expect("valid shape");
            }
            sig.log().into_tensor().coeffs().to_vec()
        })
        .collect();
    let (mean, se) = mean_and_stderr(&rows);
    let mut mean_t = TensorElement::zero(d, 3)?;
    let mut se_t = TensorElement::zero(d, 3)?;
    for k in 1..=3 {
        let offset: usize = (0..k).map(|l| d.pow(l as u32)).sum();
        let len = d.pow(k as u32);
        mean_t.level_mut(k).copy_from_slice(&mean[offset..offset + len]);
        se_t.level_mut(k).copy_from_slice(&se[offset..offset + len]);
    }
    Ok(LieEstimate { mean: LieElement::from_tensor(mean_t)?, stderr: se_t, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{cov_matrix, CovKernel};

    #[test]
    fn rank_one_covariance() {
        let grid = TimeGrid::uniform(3).unwrap();
        let h = [0.0, 0.5, -1.0, 2.0];
        let entries: Vec<f64> = h.iter().flat_map(|a| h.iter().map(move |b| a * b)).collect();
        let r = CovMatrix::new(grid, entries).unwrap();
        let basis = kl_decompose(&r).unwrap();
        assert_eq!(basis.rank(), 1);
        let sign = basis.h(0)[3].signum();
        for (a, b) in basis.h(0).iter().zip(h) {
            assert!((a - sign * b).abs() < 1e-12);
        }
    }

    #[test]
    fn diagonal_covariance_gives_axes() {
        let grid = TimeGrid::uniform(2).unwrap();
        let r = CovMatrix::new(grid, vec![3.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0]).unwrap();
        let basis = kl_decompose(&r).unwrap();
        assert_eq!(basis.eigenvalues(), &[3.0, 2.0, 1.0]);
        assert_eq!(basis.phi(0), &[1.0, 0.0, 0.0]);
        assert_eq!(basis.phi(1), &[0.0, 0.0, 1.0]);
        assert_eq!(basis.phi(2), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn coefficients_of_basis_vectors() {
        let grid = TimeGrid::uniform(8).unwrap();
        let basis = kl_decompose(&cov_matrix(&CovKernel::Brownian, &grid).unwrap()).unwrap();
        let z = basis.coefficients(basis.h(3)).unwrap();
        for (k, zk) in z.iter().enumerate() {
            let expect = if k == 3 { 1.0 } else { 0.0 };
            assert!((zk - expect).abs() < 1e-12);
        }
        assert!(basis.coefficients(&[0.0; 9]).unwrap().iter().all(|&x| x == 0.0));
        assert!(basis.coefficients(&[0.0; 4]).is_err());
    }

    #[test]
    fn partial_cov_extremes() {
        let grid = TimeGrid::uniform(6).unwrap();
        let r = cov_matrix(&CovKernel::fbm(0.3).unwrap(), &grid).unwrap();
        let basis = kl_decompose(&r).unwrap();
        assert!(basis.partial_cov(&IndexSet::full(basis.rank())).unwrap().frobenius_distance(&r) < 1e-12);
        assert!(basis.partial_cov(&IndexSet::empty()).unwrap().entries().iter().all(|&x| x == 0.0));
        assert!(basis.partial_cov(&IndexSet::prefix(basis.rank() + 1)).is_err());
    }

    #[test]
    fn index_set_operations() {
        let a = IndexSet::from_indices([5, 1, 3, 1]);
        assert_eq!(a.iter().cloned().collect::<Vec<_>>(), vec![1, 3, 5]);
        assert_eq!(a.complement(6), IndexSet::from_indices([0, 2, 4]));
        assert_eq!(a.clamp(4), IndexSet::from_indices([1, 3]));
        assert!(a.contains(3) && !a.contains(2));
        assert_eq!(IndexSet::prefix(3), IndexSet::range(0, 3));
    }

    #[test]
    fn level2_single_linear_term() {
        // one basis direction per component, both straight lines
        let grid = TimeGrid::uniform(1).unwrap();
        let ri = CovMatrix::new(grid.clone(), vec![0.0, 0.0, 0.0, 4.0]).unwrap();
        let rj = CovMatrix::new(grid, vec![0.0, 0.0, 0.0, 9.0]).unwrap();
        let bases = vec![kl_decompose(&ri).unwrap(), kl_decompose(&rj).unwrap()];
        let z = vec![vec![0.7], vec![-1.3]];
        let v = level2_double_sum(&bases, &z, &IndexSet::prefix(1), 1, 0, 1).unwrap();
        assert!((v - 0.5 * 0.7 * -1.3 * 2.0 * 3.0).abs() < 1e-14);
        assert_eq!(level2_double_sum(&bases, &z, &IndexSet::empty(), 1, 0, 1).unwrap(), 0.0);
        assert!(level2_double_sum(&bases, &z, &IndexSet::prefix(1), 1, 1, 1).is_err());
    }

    #[test]
    fn correction_vanishes_at_extremes() {
        let grid = TimeGrid::uniform(8).unwrap();
        let r = cov_matrix(&CovKernel::fbm(0.35).unwrap(), &grid).unwrap();
        let basis = kl_decompose(&r).unwrap();
        let bases = vec![basis.clone(), basis.clone()];
        let x = crate::gaussian::sample(&r, 2, 1, 5).unwrap().remove(0);
        let full = IndexSet::full(basis.rank());
        let x_full = project(&x, &bases, &full).unwrap();
        let c = level3_correction(&bases, &full, &x_full, 0, 8).unwrap();
        assert!(c.tensor().coeffs().iter().all(|v| v.abs() < 1e-12));
        let x_none = project(&x, &bases, &IndexSet::empty()).unwrap();
        let c = level3_correction(&bases, &IndexSet::empty(), &x_none, 2, 7).unwrap();
        assert!(c.tensor().coeffs().iter().all(|&v| v == 0.0));
        assert!(level3_correction(&bases, &full, &x_full, 3, 3).is_err());
    }

    #[test]
    fn conditional_mc_full_set_is_deterministic() {
        let grid = TimeGrid::uniform(6).unwrap();
        let r = cov_matrix(&CovKernel::Brownian, &grid).unwrap();
        let basis = kl_decompose(&r).unwrap();
        let bases = vec![basis.clone(), basis.clone()];
        let x = crate::gaussian::sample(&r, 2, 1, 9).unwrap().remove(0);
        let full = IndexSet::full(basis.rank());
        let x_a = project(&x, &bases, &full).unwrap();
        let est = conditional_log_mc(&bases, &full, &x_a, 1, 5, 16, 3).unwrap();
        let direct = crate::lift::signature_between(&x_a, 3, 1, 5).unwrap().log();
        assert!(est.mean.max_abs_diff(&direct) < 1e-14);
        assert!(est.stderr.coeffs().iter().all(|&s| s < 1e-14));
        assert!(conditional_log_mc(&bases, &full, &x_a, 1, 5, 0, 3).is_err());
    }
}
