//! Closed-form Brownian checks: Lévy-area moments and the scaling of the
//! residual Young–Wiener integral.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gaussian::{cov_matrix, CovKernel, GaussianSampler};
use crate::kl::{kl_decompose, residual_integrand, IndexSet};
use crate::lift::{signature_between, young_integral_quadratic, TimeGrid};

use super::stats::{mean_se, ols_slope};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LevyMoments {
    /// Sample variance of `½(X^{12} - X^{21})_{0,1}` and its standard error.
    pub area_var: (f64, f64),
    /// `E[(X^{12}_{0,1})²]` and its standard error.
    pub cross_second_moment: (f64, f64),
}

/// Monte Carlo moments of the lifted planar Brownian path on `n` uniform cells.
pub fn levy_area_moments(n: usize, samples: usize, seed: u64) -> Result<LevyMoments> {
    if samples < 2 {
        return Err(Error::input("Lévy-area moments need at least two samples"));
    }
    let grid = TimeGrid::uniform(n)?;
    let cov = cov_matrix(&CovKernel::Brownian, &grid)?;
    let sampler = GaussianSampler::new(&cov, 2, seed)?;
    let pairs = (0..samples as u64)
        .into_par_iter()
        .map(|k| -> Result<(f64, f64)> {
            let sig = signature_between(&sampler.draw(k), 2, 0, n)?;
            let (x12, x21) = (sig.tensor().get2(0, 1), sig.tensor().get2(1, 0));
            Ok((0.5 * (x12 - x21), x12))
        })
        .collect::<Result<Vec<_>>>()?;
    let areas: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let (mean, _) = mean_se(&areas);
    let centred: Vec<f64> = areas.iter().map(|a| (a - mean) * (a - mean) * samples as f64 / (samples - 1) as f64).collect();
    let squares: Vec<f64> = pairs.iter().map(|p| p.1 * p.1).collect();
    Ok(LevyMoments { area_var: mean_se(&centred), cross_second_moment: mean_se(&squares) })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct YoungWienerPoint {
    pub length: f64,
    /// Number of leading KL modes left out of the residual.
    pub conditioned: usize,
    pub moment: f64,
    pub stderr: f64,
    /// Exact second moment of the discretised integral.
    pub exact: f64,
}

/// Second moment of `∫_0^ℓ R_{A^c}([u,ℓ]x[0,u]) dX_u` for a Brownian `X`
/// independent of the residual, with `A` the first `⌈c/ℓ⌉` KL modes and `ℓ`
/// running over `ends[i] / n`.
pub fn young_wiener_scaling(n: usize, ends: &[usize], c: f64, samples: usize, seed: u64) -> Result<Vec<YoungWienerPoint>> {
    if samples < 2 {
        return Err(Error::input("Young–Wiener scaling needs at least two samples"));
    }
    let grid = TimeGrid::uniform(n)?;
    let cov = cov_matrix(&CovKernel::Brownian, &grid)?;
    let basis = kl_decompose(&cov)?;
    let rank = basis.rank();
    let sampler = GaussianSampler::new(&cov, 1, seed)?;
    let integrators: Vec<_> = (0..samples as u64).into_par_iter().map(|k| sampler.draw(k)).collect();
    let mut out = Vec::with_capacity(ends.len());
    for &end in ends {
        if end == 0 || end > n {
            return Err(Error::input(format!("end node {end} out of range")));
        }
        let length = end as f64 / n as f64;
        let conditioned = ((c / length).ceil() as usize).min(rank);
        let residual = basis.partial_cov(&IndexSet::prefix(conditioned).complement(rank))?;
        let (f, mids) = residual_integrand(&residual, 0, end);
        let values = integrators
            .iter()
            .map(|x| young_integral_quadratic(&f, &mids, x, 0, 0, end).map(|v| v * v))
            .collect::<Result<Vec<_>>>()?;
        let (moment, stderr) = mean_se(&values);
        let w: Vec<f64> = (0..end).map(|l| (f[l] + 4.0 * mids[l] + f[l + 1]) / 6.0).collect();
        let exact = (0..end)
            .map(|a| (0..end).map(|b| w[a] * w[b] * cov.rect(a, a + 1, b, b + 1)).sum::<f64>())
            .sum();
        out.push(YoungWienerPoint { length, conditioned, moment, stderr, exact });
    }
    Ok(out)
}

/// Log-log slope of the second moment against the interval length.
pub fn young_wiener_slope(points: &[YoungWienerPoint]) -> (f64, f64) {
    let x: Vec<f64> = points.iter().map(|p| p.length.ln()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.moment.ln()).collect();
    ols_slope(&x, &y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn young_wiener_mc_matches_exact() {
        let pts = young_wiener_scaling(32, &[32, 16], 2.0, 4000, 5).unwrap();
        for p in &pts {
            assert!((p.moment - p.exact).abs() < 4.0 * p.stderr, "{p:?}");
            assert!(p.exact > 0.0);
        }
        assert_eq!(pts[1].conditioned, 4);
    }

    #[test]
    fn full_conditioning_kills_the_integrand() {
        let pts = young_wiener_scaling(8, &[8], 100.0, 3, 1).unwrap();
        assert_eq!(pts[0].moment, 0.0);
        assert_eq!(pts[0].exact, 0.0);
    }

    #[test]
    fn levy_small_run() {
        let m = levy_area_moments(16, 4000, 2).unwrap();
        let target = 0.25 * (1.0 - 1.0 / 16.0);
        assert!((m.area_var.0 - target).abs() < 4.0 * m.area_var.1, "{m:?}");
        assert!((m.cross_second_moment.0 - (0.5 - 1.0 / 64.0)).abs() < 4.0 * m.cross_second_moment.1, "{m:?}");
    }
}
