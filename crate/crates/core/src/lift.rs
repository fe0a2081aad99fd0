//! Time grids, piecewise-linear sample paths and their lifts to `G^N(R^d)`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::tensor::{GroupElement, LieElement};

/// Strictly increasing times from 0 to 1. Cloning is cheap.
#[derive(Clone, Debug)]
pub struct TimeGrid {
    times: Arc<[f64]>,
}

impl PartialEq for TimeGrid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.times, &other.times) || self.times == other.times
    }
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::input("a time grid needs at least two nodes"));
        }
        if times[0] != 0.0 || *times.last().unwrap() != 1.0 {
            return Err(Error::input("time grid must start at 0 and end at 1"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::input("time grid must be strictly increasing"));
        }
        Ok(Self { times: times.into() })
    }

    /// `n` equal segments: nodes `l/n`, `l = 0..=n`.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::input("uniform grid needs at least one segment"));
        }
        Self::new((0..=n).map(|l| l as f64 / n as f64).collect())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn num_nodes(&self) -> usize {
        self.times.len()
    }

    pub fn num_segments(&self) -> usize {
        self.times.len() - 1
    }

    /// Index of the segment `[t_l, t_{l+1}]` containing `t` (the last segment for `t = 1`).
    pub fn segment_of(&self, t: f64) -> Option<usize> {
        if !(0.0..=1.0).contains(&t) {
            return None;
        }
        let idx = self.times.partition_point(|&x| x <= t);
        Some(idx.saturating_sub(1).min(self.num_segments() - 1))
    }
}

/// A `d`-dimensional path given by its values at grid nodes and linearly
/// interpolated in between. `values[i][l]` is component `i` at node `l`.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplePath {
    grid: TimeGrid,
    values: Vec<Vec<f64>>,
}

impl SamplePath {
    pub fn new(grid: TimeGrid, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::input("a sample path needs at least one component"));
        }
        if let Some(bad) = values.iter().find(|v| v.len() != grid.num_nodes()) {
            return Err(Error::input(format!(
                "component has {} values for {} grid nodes",
                bad.len(),
                grid.num_nodes()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: TimeGrid, dim: usize) -> Result<Self> {
        let n = grid.num_nodes();
        Self::new(grid, vec![vec![0.0; n]; dim])
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn component(&self, i: usize) -> &[f64] {
        &self.values[i]
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn into_components(self) -> Vec<Vec<f64>> {
        self.values
    }

    /// Value of the piecewise-linear interpolant at time `t`.
    pub fn value_at(&self, t: f64) -> Result<Vec<f64>> {
        let seg = self
            .grid
            .segment_of(t)
            .ok_or_else(|| Error::input(format!("time {t} outside [0,1]")))?;
        let times = self.grid.times();
        let w = (t - times[seg]) / (times[seg + 1] - times[seg]);
        Ok(self
            .values
            .iter()
            .map(|v| v[seg] + w * (v[seg + 1] - v[seg]))
            .collect())
    }

    /// Increment vector over segment `l`.
    pub fn segment_increment(&self, l: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[l + 1] - v[l]).collect()
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v.iter().map(|x| c * x).collect()).collect(),
        }
    }

    /// Componentwise `self + c * other` on a shared grid.
    pub fn axpy(&self, c: f64, other: &Self) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(self.dim(), other.dim()));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + c * y).collect())
            .collect();
        Ok(Self { grid: self.grid.clone(), values })
    }

    /// Re-expresses the same piecewise-linear path on a finer grid that
    /// contains every node of the current one.
    pub fn resample(&self, grid: &TimeGrid) -> Result<Self> {
        let values = grid
            .times()
            .iter()
            .map(|&t| self.value_at(t))
            .collect::<Result<Vec<_>>>()?;
        let dim = self.dim();
        let by_component = (0..dim).map(|i| values.iter().map(|v| v[i]).collect()).collect();
        Self::new(grid.clone(), by_component)
    }
}

/// A `G^N(R^d)`-valued path on a grid, started at the identity.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupPath {
    grid: TimeGrid,
    points: Vec<GroupElement>,
}

impl GroupPath {
    pub fn new(grid: TimeGrid, points: Vec<GroupElement>) -> Result<Self> {
        if points.len() != grid.num_nodes() {
            return Err(Error::input(format!(
                "{} points for {} grid nodes",
                points.len(),
                grid.num_nodes()
            )));
        }
        let first = &points[0];
        if let Some(p) = points.iter().find(|p| p.dim() != first.dim() || p.depth() != first.depth()) {
            return Err(Error::DimensionMismatch(first.dim(), p.dim()));
        }
        let e = GroupElement::identity(first.dim(), first.depth())?;
        if first.max_abs_diff(&e) > 1e-12 {
            return Err(Error::input("group path must start at the identity"));
        }
        Ok(Self { grid, points })
    }

    /// The constant path at the identity.
    pub fn constant(grid: TimeGrid, dim: usize, depth: usize) -> Result<Self> {
        let e = GroupElement::identity(dim, depth)?;
        let points = vec![e; grid.num_nodes()];
        Ok(Self { grid, points })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn points(&self) -> &[GroupElement] {
        &self.points
    }

    pub fn point(&self, l: usize) -> &GroupElement {
        &self.points[l]
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }

    pub fn depth(&self) -> usize {
        self.points[0].depth()
    }

    /// Increment `x_a^{-1} ⊗ x_b` between nodes `a <= b`.
    pub fn signature_increment(&self, a: usize, b: usize) -> Result<GroupElement> {
        if a > b {
            return Err(Error::IndexOrder(format!("increment needs a <= b, got ({a}, {b})")));
        }
        if b >= self.points.len() {
            return Err(Error::input(format!("node {b} out of range")));
        }
        self.points[a].increment(&self.points[b])
    }

    /// Applies the dilation `δ_λ` at every node.
    pub fn dilate(&self, lambda: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            points: self.points.iter().map(|g| g.dilate(lambda)).collect(),
        }
    }
}

/// Step-`depth` signature of a single straight segment with increment `dx`.
pub fn segment_signature(dx: &[f64], depth: usize) -> Result<GroupElement> {
    Ok(LieElement::from_vector(dx, depth)?.exp())
}

/// Exact step-`depth` lift of the piecewise-linear interpolant, built by
/// Chen's relation from segment exponentials.
pub fn lift_pl(path: &SamplePath, depth: usize) -> Result<GroupPath> {
    let mut points = Vec::with_capacity(path.grid.num_nodes());
    let mut current = GroupElement::identity(path.dim(), depth)?;
    points.push(current.clone());
    for l in 0..path.grid.num_segments() {
        let seg = segment_signature(&path.segment_increment(l), depth)?;
        current = GroupElement::from_tensor_unchecked(current.tensor().mul_unchecked(seg.tensor()));
        points.push(current.clone());
    }
    Ok(GroupPath { grid: path.grid.clone(), points })
}

/// Signature of the path restricted to nodes `a..=b`, computed directly from
/// the segments rather than through the lifted end points.
pub fn signature_between(path: &SamplePath, depth: usize, a: usize, b: usize) -> Result<GroupElement> {
    if a > b {
        return Err(Error::IndexOrder(format!("signature needs a <= b, got ({a}, {b})")));
    }
    if b >= path.grid.num_nodes() {
        return Err(Error::input(format!("node {b} out of range")));
    }
    let mut current = GroupElement::identity(path.dim(), depth)?;
    for l in a..b {
        let seg = segment_signature(&path.segment_increment(l), depth)?;
        current = GroupElement::from_tensor_unchecked(current.tensor().mul_unchecked(seg.tensor()));
    }
    Ok(current)
}

/// Lift of a Cameron-Martin path given on the grid. On grid data the iterated
/// Young integrals reduce to the piecewise-linear lift.
pub fn lift_cameron_martin(h: &SamplePath, depth: usize) -> Result<GroupPath> {
    lift_pl(h, depth)
}

/// `∫_{t_a}^{t_b} f dx_j` for `f` quadratic on each segment (given by node
/// and midpoint values) against the piecewise-linear component `j` of
/// `integrator`. Simpson's rule per segment, exact for this class.
pub fn young_integral_quadratic(
    f_nodes: &[f64],
    f_mids: &[f64],
    integrator: &SamplePath,
    component: usize,
    a: usize,
    b: usize,
) -> Result<f64> {
    let grid = integrator.grid();
    if a > b {
        return Err(Error::IndexOrder(format!("integral needs a <= b, got ({a}, {b})")));
    }
    if b >= grid.num_nodes() {
        return Err(Error::input(format!("node {b} out of range")));
    }
    if f_nodes.len() != grid.num_nodes() || f_mids.len() != grid.num_segments() {
        return Err(Error::input("integrand must have one value per node and per segment"));
    }
    if component >= integrator.dim() {
        return Err(Error::input(format!("component {component} out of range")));
    }
    let x = integrator.component(component);
    Ok((a..b)
        .map(|l| (x[l + 1] - x[l]) * (f_nodes[l] + 4.0 * f_mids[l] + f_nodes[l + 1]) / 6.0)
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation() {
        assert!(TimeGrid::new(vec![0.0, 0.5, 0.5, 1.0]).is_err());
        assert!(TimeGrid::new(vec![0.1, 1.0]).is_err());
        assert!(TimeGrid::new(vec![0.0]).is_err());
        assert!(TimeGrid::uniform(0).is_err());
        let g = TimeGrid::uniform(4).unwrap();
        assert_eq!(g.segment_of(1.0), Some(3));
        assert_eq!(g.segment_of(0.3), Some(1));
        assert_eq!(g.segment_of(1.5), None);
    }

    #[test]
    fn line_signature() {
        let v = [0.3, -1.1, 2.0];
        let grid = TimeGrid::uniform(1).unwrap();
        let path = SamplePath::new(grid, v.iter().map(|&x| vec![0.0, x]).collect()).unwrap();
        let end = lift_pl(&path, 3).unwrap().point(1).clone();
        for i in 0..3 {
            assert!((end.level(1)[i] - v[i]).abs() < 1e-15);
            for j in 0..3 {
                assert!((end.tensor().get2(i, j) - v[i] * v[j] / 2.0).abs() < 1e-15);
                for k in 0..3 {
                    assert!((end.tensor().get3(i, j, k) - v[i] * v[j] * v[k] / 6.0).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn constant_path_lifts_to_identity() {
        let grid = TimeGrid::uniform(5).unwrap();
        let path = SamplePath::new(grid.clone(), vec![vec![1.5; 6], vec![-2.0; 6]]).unwrap();
        let lifted = lift_pl(&path, 3).unwrap();
        assert_eq!(lifted, GroupPath::constant(grid, 2, 3).unwrap());
    }

    #[test]
    fn two_segment_area() {
        let grid = TimeGrid::uniform(2).unwrap();
        let path = SamplePath::new(grid, vec![vec![0.0, 1.0, 1.0], vec![0.0, 0.0, 1.0]]).unwrap();
        let end = lift_pl(&path, 2).unwrap().point(2).clone();
        assert_eq!(end.tensor().get2(0, 1), 1.0);
        assert_eq!(end.tensor().get2(1, 0), 0.0);
    }

    #[test]
    fn increment_cases_and_errors() {
        let grid = TimeGrid::uniform(3).unwrap();
        let path = SamplePath::new(grid, vec![vec![0.0, 1.0, -1.0, 0.5], vec![0.0, 0.3, 0.2, 2.0]]).unwrap();
        let gp = lift_pl(&path, 3).unwrap();
        let e = GroupElement::identity(2, 3).unwrap();
        assert!(gp.signature_increment(2, 2).unwrap().max_abs_diff(&e) < 1e-15);
        assert!(gp.signature_increment(0, 3).unwrap().max_abs_diff(gp.point(3)) < 1e-15);
        assert!(matches!(gp.signature_increment(2, 1), Err(Error::IndexOrder(_))));
        let direct = signature_between(&path, 3, 1, 3).unwrap();
        assert!(direct.max_abs_diff(&gp.signature_increment(1, 3).unwrap()) < 1e-14);
    }

    #[test]
    fn simpson_examples() {
        let grid = TimeGrid::uniform(1).unwrap();
        let x = SamplePath::new(grid, vec![vec![0.0, 1.0]]).unwrap();
        assert_eq!(young_integral_quadratic(&[1.0, 1.0], &[1.0], &x, 0, 0, 1).unwrap(), 1.0);
        assert!((young_integral_quadratic(&[0.0, 1.0], &[0.5], &x, 0, 0, 1).unwrap() - 0.5).abs() < 1e-15);
        assert!((young_integral_quadratic(&[0.0, 1.0], &[0.25], &x, 0, 0, 1).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(young_integral_quadratic(&[0.0, 1.0], &[0.25], &x, 0, 1, 0).is_err());
    }

    #[test]
    fn constant_integrand_gives_increment() {
        let grid = TimeGrid::uniform(4).unwrap();
        let x = SamplePath::new(grid, vec![vec![0.0, 0.4, -0.3, 1.0, 2.5]]).unwrap();
        let val = young_integral_quadratic(&[1.0; 5], &[1.0; 4], &x, 0, 1, 4).unwrap();
        assert!((val - 2.1).abs() < 1e-14);
    }

    #[test]
    fn path_shape_errors() {
        let grid = TimeGrid::uniform(2).unwrap();
        assert!(SamplePath::new(grid.clone(), vec![vec![0.0; 2]]).is_err());
        assert!(SamplePath::new(grid, vec![]).is_err());
    }
}
