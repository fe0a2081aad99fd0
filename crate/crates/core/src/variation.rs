//! p-variation and Hölder distances between group-valued paths, and 2D
//! ρ-variation of covariance matrices.
//!
//! All suprema run over dissections made of grid nodes. For the 1D
//! p-variation this is solved exactly by the dynamic programme
//! `V(j) = max_{i<j} V(i) + d(X_{i,j}, Y_{i,j})^p`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::gaussian::{substream, CovMatrix};
use crate::lift::GroupPath;
use crate::tensor::GroupElement;

/// Largest number of segments accepted by [`PVarMode::Brute`].
pub const PVAR_BRUTE_MAX_SEGMENTS: usize = 14;
/// Largest number of segments accepted by [`RhoVarMode::Brute`].
pub const RHOVAR_BRUTE_MAX_SEGMENTS: usize = 10;
/// Random restarts used by [`RhoVarMode::HillClimb`] after the full-grid start.
pub const HILLCLIMB_RESTARTS: u64 = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PVarMode {
    Dp,
    /// Enumerates all `2^(n-1)` dissections.
    Brute,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RhoVarMode {
    /// Finest dissection only.
    FullGrid,
    /// Single-node insert/delete local search from the full grid and from
    /// [`HILLCLIMB_RESTARTS`] random dissections; a certified lower bound.
    HillClimb { seed: u64 },
    /// Exact supremum over all dissections.
    Brute,
}

/// Sorted node indices of a grid, containing both end points.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dissection {
    nodes: Vec<usize>,
}

impl Dissection {
    pub fn new(nodes: Vec<usize>, first: usize, last: usize) -> Result<Self> {
        if nodes.first() != Some(&first) || nodes.last() != Some(&last) {
            return Err(Error::input("dissection must contain both end points"));
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::input("dissection must be strictly increasing"));
        }
        Ok(Self { nodes })
    }

    /// Every node from `first` to `last`.
    pub fn full(first: usize, last: usize) -> Self {
        Self { nodes: (first..=last).collect() }
    }

    fn from_mask(first: usize, last: usize, mask: &[bool]) -> Self {
        let mut nodes = vec![first];
        nodes.extend(mask.iter().enumerate().filter(|(_, &m)| m).map(|(k, _)| first + 1 + k));
        nodes.push(last);
        Self { nodes }
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }
}

fn check_paths(x: &GroupPath, y: &GroupPath) -> Result<()> {
    if x.grid() != y.grid() {
        return Err(Error::GridMismatch);
    }
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch(x.dim(), y.dim()));
    }
    if x.depth() != y.depth() {
        return Err(Error::DepthMismatch(x.depth(), y.depth()));
    }
    Ok(())
}

/// Upper triangle of `d(X_{i,j}, Y_{i,j})`, row-major over `n x n` nodes.
/// `y = None` stands for the constant path.
fn pair_distances(x: &GroupPath, y: Option<&GroupPath>) -> Vec<f64> {
    let n = x.points().len();
    let x_inv: Vec<GroupElement> = x.points().iter().map(GroupElement::inverse).collect();
    let y_inv: Option<Vec<GroupElement>> = y.map(|y| y.points().iter().map(GroupElement::inverse).collect());
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let xij = x_inv[i].mul(x.point(j)).expect("shapes checked");
            out[i * n + j] = match (y, &y_inv) {
                (Some(y), Some(y_inv)) => {
                    let yij = y_inv[i].mul(y.point(j)).expect("shapes checked");
                    xij.dist(&yij).expect("shapes checked")
                }
                _ => xij.hom_norm(),
            };
        }
    }
    out
}

fn check_p(p: f64) -> Result<()> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::input(format!("p-variation exponent must be >= 1, got {p}")));
    }
    Ok(())
}

fn pvar_from_distances(dist: &[f64], n: usize, p: f64, mode: PVarMode) -> Result<f64> {
    let cost = |i: usize, j: usize| dist[i * n + j].powf(p);
    let segments = n - 1;
    let total = match mode {
        PVarMode::Dp => {
            let mut best = vec![0.0f64; n];
            for j in 1..n {
                best[j] = (0..j).map(|i| best[i] + cost(i, j)).fold(f64::NEG_INFINITY, f64::max);
            }
            best[n - 1]
        }
        PVarMode::Brute => {
            if segments > PVAR_BRUTE_MAX_SEGMENTS {
                return Err(Error::input(format!(
                    "brute-force p-variation needs at most {PVAR_BRUTE_MAX_SEGMENTS} segments, got {segments}"
                )));
            }
            let interior = segments.saturating_sub(1);
            let mut best = f64::NEG_INFINITY;
            for mask in 0u32..(1u32 << interior) {
                let mut prev = 0;
                let mut sum = 0.0;
                for k in 0..interior {
                    if mask >> k & 1 == 1 {
                        sum += cost(prev, k + 1);
                        prev = k + 1;
                    }
                }
                sum += cost(prev, n - 1);
                best = best.max(sum);
            }
            best
        }
    };
    Ok(total.powf(1.0 / p))
}

/// `d_{p-var}(X, Y)` over all grid dissections.
pub fn pvar_dist(x: &GroupPath, y: &GroupPath, p: f64, mode: PVarMode) -> Result<f64> {
    check_paths(x, y)?;
    check_p(p)?;
    let n = x.points().len();
    pvar_from_distances(&pair_distances(x, Some(y)), n, p, mode)
}

/// `‖X‖_{p-var}`, the distance to the constant path.
pub fn pvar_norm(x: &GroupPath, p: f64, mode: PVarMode) -> Result<f64> {
    check_p(p)?;
    let n = x.points().len();
    pvar_from_distances(&pair_distances(x, None), n, p, mode)
}

fn holder_from_distances(x: &GroupPath, dist: &[f64], alpha: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::input(format!("Hölder exponent must lie in [0,1], got {alpha}")));
    }
    let times = x.grid().times();
    let n = times.len();
    let mut best = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            best = best.max(dist[i * n + j] / (times[j] - times[i]).powf(alpha));
        }
    }
    Ok(best)
}

/// `d_{α-Höl}(X, Y) = max_{s<t} d(X_{s,t}, Y_{s,t}) / |t-s|^α` over node pairs;
/// `α = 0` gives the uniform increment distance `d_0`.
pub fn holder_dist(x: &GroupPath, y: &GroupPath, alpha: f64) -> Result<f64> {
    check_paths(x, y)?;
    holder_from_distances(x, &pair_distances(x, Some(y)), alpha)
}

pub fn holder_norm(x: &GroupPath, alpha: f64) -> Result<f64> {
    holder_from_distances(x, &pair_distances(x, None), alpha)
}

/// `(d_{p-var}, d_{1/p-Höl})` from a single table of increment distances.
/// `y = None` gives the norms of `x`.
pub fn pvar_holder_pair(x: &GroupPath, y: Option<&GroupPath>, p: f64) -> Result<(f64, f64)> {
    if let Some(y) = y {
        check_paths(x, y)?;
    }
    check_p(p)?;
    let dist = pair_distances(x, y);
    let n = x.points().len();
    Ok((pvar_from_distances(&dist, n, p, PVarMode::Dp)?, holder_from_distances(x, &dist, 1.0 / p)?))
}

/// `Σ_{u,v} |R(rect_u x rect_v)|^ρ` over the cells of one dissection used on
/// both axes (not yet raised to `1/ρ`).
pub fn rho_var_sum(cov: &CovMatrix, dissection: &Dissection, rho: f64) -> f64 {
    let nodes = dissection.nodes();
    let mut sum = 0.0;
    for u in nodes.windows(2) {
        for v in nodes.windows(2) {
            sum += cov.rect(u[0], u[1], v[0], v[1]).abs().powf(rho);
        }
    }
    sum
}

fn local_search(cov: &CovMatrix, rho: f64, first: usize, last: usize, mask: &mut [bool]) -> f64 {
    let mut best = rho_var_sum(cov, &Dissection::from_mask(first, last, mask), rho);
    loop {
        let mut improved = false;
        for k in 0..mask.len() {
            mask[k] = !mask[k];
            let val = rho_var_sum(cov, &Dissection::from_mask(first, last, mask), rho);
            if val > best {
                best = val;
                improved = true;
                break;
            }
            mask[k] = !mask[k];
        }
        if !improved {
            return best;
        }
    }
}

/// 2D ρ-variation of `cov` over the square `[t_first, t_last]^2`.
pub fn rho_var_2d_on(cov: &CovMatrix, rho: f64, mode: RhoVarMode, first: usize, last: usize) -> Result<f64> {
    if !(rho >= 1.0) || !rho.is_finite() {
        return Err(Error::input(format!("ρ must be >= 1, got {rho}")));
    }
    if first >= last || last >= cov.num_nodes() {
        return Err(Error::IndexOrder(format!("node range [{first}, {last}]")));
    }
    let interior = last - first - 1;
    let sup = match mode {
        RhoVarMode::FullGrid => rho_var_sum(cov, &Dissection::full(first, last), rho),
        RhoVarMode::HillClimb { seed } => {
            let mut mask = vec![true; interior];
            let mut best = local_search(cov, rho, first, last, &mut mask);
            for restart in 0..HILLCLIMB_RESTARTS {
                let mut rng = substream(seed, restart);
                let mut mask: Vec<bool> = (0..interior).map(|_| rng.random_bool(0.5)).collect();
                best = best.max(local_search(cov, rho, first, last, &mut mask));
            }
            best
        }
        RhoVarMode::Brute => {
            if last - first > RHOVAR_BRUTE_MAX_SEGMENTS {
                return Err(Error::input(format!(
                    "brute-force ρ-variation needs at most {RHOVAR_BRUTE_MAX_SEGMENTS} segments"
                )));
            }
            (0u32..(1u32 << interior))
                .map(|bits| {
                    let mask: Vec<bool> = (0..interior).map(|k| bits >> k & 1 == 1).collect();
                    rho_var_sum(cov, &Dissection::from_mask(first, last, &mask), rho)
                })
                .fold(f64::NEG_INFINITY, f64::max)
        }
    };
    Ok(sup.powf(1.0 / rho))
}

/// 2D ρ-variation of `cov` over `[0,1]^2`.
pub fn rho_var_2d(cov: &CovMatrix, rho: f64, mode: RhoVarMode) -> Result<f64> {
    rho_var_2d_on(cov, rho, mode, 0, cov.num_nodes() - 1)
}
