//! Truncated tensor algebra `T^N(R^d)` for `N <= 3`, the free nilpotent group
//! of group-like elements inside it, and its Lie algebra.
//!
//! Coefficients are stored level by level in one flat buffer: level `k`
//! holds `d^k` entries in row-major order, so the level-3 entry `(i, j, k)`
//! lives at `i*d*d + j*d + k` of that level.

use crate::error::{Error, Result};

/// Largest supported truncation depth.
pub const MAX_DEPTH: usize = 3;

const SCALAR_TOL: f64 = 1e-12;

fn level_offset(dim: usize, level: usize) -> usize {
    (0..level).map(|k| dim.pow(k as u32)).sum()
}

#[derive(Clone, Debug, PartialEq)]
pub struct TensorElement {
    dim: usize,
    depth: usize,
    coeffs: Vec<f64>,
}

impl TensorElement {
    pub fn zero(dim: usize, depth: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::input("dimension must be positive"));
        }
        if depth == 0 || depth > MAX_DEPTH {
            return Err(Error::input(format!("depth must be in 1..={MAX_DEPTH}, got {depth}")));
        }
        Ok(Self::zero_unchecked(dim, depth))
    }

    pub(crate) fn zero_unchecked(dim: usize, depth: usize) -> Self {
        Self {
            dim,
            depth,
            coeffs: vec![0.0; level_offset(dim, depth + 1)],
        }
    }

    /// The unit `1 = exp(0)`.
    pub fn one(dim: usize, depth: usize) -> Result<Self> {
        let mut t = Self::zero(dim, depth)?;
        t.coeffs[0] = 1.0;
        Ok(t)
    }

    /// Builds an element from explicit levels. `levels[k]` is level `k + 1`
    /// and must have `dim^(k+1)` entries; missing trailing levels are zero.
    pub fn from_levels(dim: usize, depth: usize, level0: f64, levels: &[&[f64]]) -> Result<Self> {
        let mut t = Self::zero(dim, depth)?;
        if levels.len() > depth {
            return Err(Error::input(format!("{} levels given for depth {depth}", levels.len())));
        }
        t.coeffs[0] = level0;
        for (k, lvl) in levels.iter().enumerate() {
            let target = t.level_mut(k + 1);
            if lvl.len() != target.len() {
                return Err(Error::input(format!(
                    "level {} needs {} entries, got {}",
                    k + 1,
                    target.len(),
                    lvl.len()
                )));
            }
            target.copy_from_slice(lvl);
        }
        Ok(t)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn scalar(&self) -> f64 {
        self.coeffs[0]
    }

    /// Coefficients of tensor level `k` (`k <= depth`).
    pub fn level(&self, k: usize) -> &[f64] {
        assert!(k <= self.depth, "level {k} above depth {}", self.depth);
        let start = level_offset(self.dim, k);
        &self.coeffs[start..start + self.dim.pow(k as u32)]
    }

    pub fn level_mut(&mut self, k: usize) -> &mut [f64] {
        assert!(k <= self.depth, "level {k} above depth {}", self.depth);
        let start = level_offset(self.dim, k);
        let len = self.dim.pow(k as u32);
        &mut self.coeffs[start..start + len]
    }

    /// Entry `(i, j)` of level 2.
    pub fn get2(&self, i: usize, j: usize) -> f64 {
        self.level(2)[i * self.dim + j]
    }

    /// Entry `(i, j, k)` of level 3.
    pub fn get3(&self, i: usize, j: usize, k: usize) -> f64 {
        self.level(3)[(i * self.dim + j) * self.dim + k]
    }

    /// Euclidean norm of level `k`.
    pub fn level_norm(&self, k: usize) -> f64 {
        self.level(k).iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(self.dim, other.dim));
        }
        if self.depth != other.depth {
            return Err(Error::DepthMismatch(self.depth, other.depth));
        }
        Ok(())
    }

    /// Truncated tensor product.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(self.mul_unchecked(other))
    }

    pub(crate) fn mul_unchecked(&self, other: &Self) -> Self {
        let d = self.dim;
        let mut out = Self::zero_unchecked(d, self.depth);
        for k in 0..=self.depth {
            let out_start = level_offset(d, k);
            for p in 0..=k {
                let q = k - p;
                let stride = d.pow(q as u32);
                let a = self.level(p);
                let b = other.level(q);
                for (i, &x) in a.iter().enumerate() {
                    if x == 0.0 {
                        continue;
                    }
                    let row = &mut out.coeffs[out_start + i * stride..out_start + (i + 1) * stride];
                    for (o, &y) in row.iter_mut().zip(b) {
                        *o += x * y;
                    }
                }
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(self.zip_with(other, |a, b| a + b))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(self.zip_with(other, |a, b| a - b))
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            dim: self.dim,
            depth: self.depth,
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            dim: self.dim,
            depth: self.depth,
            coeffs: self.coeffs.iter().map(|x| c * x).collect(),
        }
    }

    /// Largest absolute coefficient difference; infinite on shape mismatch.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        if self.check_compatible(other).is_err() {
            return f64::INFINITY;
        }
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Largest violation of the shuffle relations characterising group-like
    /// elements (after normalising by the scalar part):
    /// `g_ij + g_ji = g_i g_j` and `g_i g_jk = g_ijk + g_jik + g_jki`.
    pub fn shuffle_defect(&self) -> f64 {
        let d = self.dim;
        let c = self.scalar();
        let mut worst = 0.0f64;
        if self.depth < 2 {
            return worst;
        }
        let l1 = self.level(1);
        for i in 0..d {
            for j in 0..d {
                let lhs = c * (self.get2(i, j) + self.get2(j, i));
                worst = worst.max((lhs - l1[i] * l1[j]).abs());
            }
        }
        if self.depth >= 3 {
            for i in 0..d {
                for j in 0..d {
                    for k in 0..d {
                        let lhs = c * l1[i] * self.get2(j, k);
                        let rhs = c * c * (self.get3(i, j, k) + self.get3(j, i, k) + self.get3(j, k, i));
                        worst = worst.max((lhs - rhs).abs());
                    }
                }
            }
        }
        worst
    }

    /// `1 - x + x^2 - x^3` for `x = self - 1`; the inverse of any element with
    /// unit scalar part.
    fn inverse_series(&self) -> Self {
        let mut x = self.clone();
        x.coeffs[0] -= 1.0;
        let x2 = x.mul_unchecked(&x);
        let mut out = Self::zero_unchecked(self.dim, self.depth);
        out.coeffs[0] = 1.0;
        for (o, (&a, &b)) in out.coeffs.iter_mut().zip(x.coeffs.iter().zip(&x2.coeffs)) {
            *o += b - a;
        }
        if self.depth >= 3 {
            let x3 = x2.mul_unchecked(&x);
            for (o, &c) in out.coeffs.iter_mut().zip(&x3.coeffs) {
                *o -= c;
            }
        }
        out
    }
}

/// A group-like element of `G^N(R^d)`; scalar part is exactly one.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupElement(TensorElement);

impl GroupElement {
    /// The neutral element `e = exp(0)`.
    pub fn identity(dim: usize, depth: usize) -> Result<Self> {
        TensorElement::one(dim, depth).map(Self)
    }

    /// Wraps a tensor whose scalar part is one. Group-likeness of the
    /// higher levels is not re-verified here; see [`TensorElement::shuffle_defect`].
    pub fn from_tensor(t: TensorElement) -> Result<Self> {
        if (t.scalar() - 1.0).abs() > SCALAR_TOL {
            return Err(Error::input(format!("group element needs scalar part 1, got {}", t.scalar())));
        }
        Ok(Self(t))
    }

    pub(crate) fn from_tensor_unchecked(t: TensorElement) -> Self {
        Self(t)
    }

    pub fn tensor(&self) -> &TensorElement {
        &self.0
    }

    pub fn into_tensor(self) -> TensorElement {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim
    }

    pub fn depth(&self) -> usize {
        self.0.depth
    }

    pub fn level(&self, k: usize) -> &[f64] {
        self.0.level(k)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.0.mul(&other.0).map(Self)
    }

    pub fn inverse(&self) -> Self {
        Self(self.0.inverse_series())
    }

    /// Rough-path increment `self^{-1} ⊗ other`.
    pub fn increment(&self, other: &Self) -> Result<Self> {
        self.0.check_compatible(&other.0)?;
        Ok(Self(self.0.inverse_series().mul_unchecked(&other.0)))
    }

    /// Logarithm `(g-1) - (g-1)^2/2 + (g-1)^3/3`, truncated.
    pub fn log(&self) -> LieElement {
        let mut x = self.0.clone();
        x.coeffs[0] = 0.0;
        let x2 = x.mul_unchecked(&x);
        let mut out = x.clone();
        for (o, &b) in out.coeffs.iter_mut().zip(&x2.coeffs) {
            *o -= 0.5 * b;
        }
        if x.depth >= 3 {
            let x3 = x2.mul_unchecked(&x);
            for (o, &c) in out.coeffs.iter_mut().zip(&x3.coeffs) {
                *o += c / 3.0;
            }
        }
        LieElement(out)
    }

    /// Dilation: level `i` is scaled by `lambda^i`.
    pub fn dilate(&self, lambda: f64) -> Self {
        let mut out = self.0.clone();
        let mut factor = 1.0;
        for k in 1..=out.depth {
            factor *= lambda;
            for c in out.level_mut(k) {
                *c *= factor;
            }
        }
        Self(out)
    }

    /// Symmetrised homogeneous norm
    /// `max_i max(|π_i(g)|^{1/i}, |π_i(g^{-1})|^{1/i})`.
    pub fn hom_norm(&self) -> f64 {
        let inv = self.0.inverse_series();
        (1..=self.0.depth)
            .map(|k| {
                let root = 1.0 / k as f64;
                self.0.level_norm(k).powf(root).max(inv.level_norm(k).powf(root))
            })
            .fold(0.0, f64::max)
    }

    /// Left-invariant distance `‖g^{-1} ⊗ h‖`.
    pub fn dist(&self, other: &Self) -> Result<f64> {
        if self.0 == other.0 {
            return Ok(0.0);
        }
        Ok(self.increment(other)?.hom_norm())
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.0.max_abs_diff(&other.0)
    }

    pub fn shuffle_defect(&self) -> f64 {
        self.0.shuffle_defect()
    }
}

/// An element of the free step-N Lie algebra (scalar part zero).
#[derive(Clone, Debug, PartialEq)]
pub struct LieElement(TensorElement);

impl LieElement {
    pub fn zero(dim: usize, depth: usize) -> Result<Self> {
        TensorElement::zero(dim, depth).map(Self)
    }

    /// Lie element with only a level-1 component.
    pub fn from_vector(v: &[f64], depth: usize) -> Result<Self> {
        TensorElement::from_levels(v.len(), depth, 0.0, &[v]).map(Self)
    }

    pub fn from_tensor(t: TensorElement) -> Result<Self> {
        if t.scalar() != 0.0 {
            return Err(Error::input(format!("Lie element needs scalar part 0, got {}", t.scalar())));
        }
        Ok(Self(t))
    }

    pub fn tensor(&self) -> &TensorElement {
        &self.0
    }

    pub fn into_tensor(self) -> TensorElement {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim
    }

    pub fn depth(&self) -> usize {
        self.0.depth
    }

    pub fn level(&self, k: usize) -> &[f64] {
        self.0.level(k)
    }

    pub fn exp(&self) -> GroupElement {
        let x = &self.0;
        let x2 = x.mul_unchecked(x);
        let mut out = x.clone();
        out.coeffs[0] = 1.0;
        for (o, &b) in out.coeffs.iter_mut().zip(&x2.coeffs) {
            *o += 0.5 * b;
        }
        if x.depth >= 3 {
            let x3 = x2.mul_unchecked(x);
            for (o, &c) in out.coeffs.iter_mut().zip(&x3.coeffs) {
                *o += c / 6.0;
            }
        }
        GroupElement(out)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.0.add(&other.0).map(Self)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.0.sub(&other.0).map(Self)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self(self.0.scale(c))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.0.max_abs_diff(&other.0)
    }

    /// Largest deviation of level 2 from antisymmetry.
    pub fn antisymmetry_defect(&self) -> f64 {
        if self.0.depth < 2 {
            return 0.0;
        }
        let d = self.0.dim;
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                worst = worst.max((self.0.get2(i, j) + self.0.get2(j, i)).abs());
            }
        }
        worst
    }

    /// The bracket `[e_i, [e_i, e_j]]` in tensor coordinates:
    /// `+1` at `(i,i,j)`, `-2` at `(i,j,i)`, `+1` at `(j,i,i)`.
    pub fn bracket_iij(i: usize, j: usize, dim: usize) -> Result<Self> {
        if i == j {
            return Err(Error::input("bracket [e_i,[e_i,e_j]] needs i != j"));
        }
        if i >= dim || j >= dim {
            return Err(Error::input(format!("indices ({i},{j}) out of range for dimension {dim}")));
        }
        let mut t = TensorElement::zero(dim, 3)?;
        let l3 = t.level_mut(3);
        l3[(i * dim + i) * dim + j] += 1.0;
        l3[(i * dim + j) * dim + i] -= 2.0;
        l3[(j * dim + i) * dim + i] += 1.0;
        Ok(Self(t))
    }
}
