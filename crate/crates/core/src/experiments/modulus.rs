use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gaussian::{substream, GaussianSampler};
use crate::kl::{coefficients, project_coefficients, IndexSet, KlBasis};
use crate::lift::lift_pl;

use super::config::ExperimentConfig;
use super::records::{RecordContext, ResultRecord};
use super::stats::{mean_se, ols_slope};
use super::Model;

pub const DEFAULT_SUBSETS: usize = 50;
/// Shortest interval used in the regression, in grid cells.
pub const MIN_CELLS: usize = 8;

/// Second moments `E‖X^A_{0,t_L}‖²` for each set `A` and each end node `L`:
/// `out[a][l] = (mean, stderr)`. The same Gaussian coefficients are reused
/// for every set.
pub fn modulus_moments(
    bases: &[KlBasis],
    coeffs: &[Vec<Vec<f64>>],
    sets: &[IndexSet],
    ends: &[usize],
) -> Result<Vec<Vec<(f64, f64)>>> {
    if let Some(&bad) = ends.iter().find(|&&l| l == 0 || l >= bases[0].grid().num_nodes()) {
        return Err(Error::input(format!("end node {bad} out of range")));
    }
    sets.par_iter()
        .map(|set| -> Result<Vec<(f64, f64)>> {
            let mut norms = vec![Vec::with_capacity(coeffs.len()); ends.len()];
            for z in coeffs {
                let lift = lift_pl(&project_coefficients(z, bases, set)?, 3)?;
                for (slot, &l) in ends.iter().enumerate() {
                    norms[slot].push(lift.point(l).hom_norm().powi(2));
                }
            }
            Ok(norms.iter().map(|v| mean_se(v)).collect())
        })
        .collect()
}

pub fn run_uniform_modulus(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    cfg.validate_lift()?;
    cfg.require_power_of_two()?;
    let samples = cfg.require_samples()?;
    let hurst = cfg.kernel.hurst().ok_or_else(|| Error::config("uniform modulus needs a Hurst index"))?;
    if hurst < 0.3 {
        return Err(Error::config(format!("uniform modulus needs hurst >= 0.3, got {hurst}")));
    }
    let n = cfg.n;
    if n < 2 * MIN_CELLS {
        return Err(Error::config(format!("uniform modulus needs n >= {}", 2 * MIN_CELLS)));
    }
    let model = Model::new(cfg)?;
    let rank = model.rank();
    let count = cfg.subsets.unwrap_or(DEFAULT_SUBSETS);
    let sets: Vec<IndexSet> = (0..count as u64)
        .map(|a| IndexSet::random(rank, &mut substream(cfg.seed ^ 0xa5e75_u64, a)))
        .collect();
    let ends: Vec<usize> = (0..).map(|k| n >> k).take_while(|&l| l >= MIN_CELLS).collect();
    let sampler = GaussianSampler::new(&model.cov, cfg.d, cfg.seed)?;
    let coeffs = (0..samples as u64)
        .into_par_iter()
        .map(|k| coefficients(&sampler.draw(k), &model.bases))
        .collect::<Result<Vec<_>>>()?;
    let moments = modulus_moments(&model.bases, &coeffs, &sets, &ends)?;

    let ctx = RecordContext::from_config(cfg);
    let mut out = Vec::new();
    let mut log_len = Vec::new();
    let mut log_mom = Vec::new();
    for (slot, &l) in ends.iter().enumerate() {
        let (best, se) = moments
            .iter()
            .map(|row| row[slot])
            .fold((0.0, 0.0), |acc, v| if v.0 > acc.0 { v } else { acc });
        let len = l as f64 / n as f64;
        out.push(ctx.record(Some(l), format!("max_second_moment@{len}"), best, Some(se)));
        if best > 0.0 {
            log_len.push(len.ln());
            log_mom.push(best.ln());
        }
    }
    if log_len.len() >= 2 {
        let (slope, se) = ols_slope(&log_len, &log_mom);
        out.push(ctx.record(None, "loglog_slope", slope, Some(se)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{cov_matrix, CovKernel};
    use crate::kl::kl_decompose;
    use crate::lift::TimeGrid;

    #[test]
    fn empty_set_gives_zero_moments() {
        let grid = TimeGrid::uniform(8).unwrap();
        let cov = cov_matrix(&CovKernel::Brownian, &grid).unwrap();
        let basis = kl_decompose(&cov).unwrap();
        let bases = vec![basis.clone(), basis];
        let sampler = GaussianSampler::new(&cov, 2, 3).unwrap();
        let coeffs: Vec<_> = (0..5).map(|k| coefficients(&sampler.draw(k), &bases).unwrap()).collect();
        let m = modulus_moments(&bases, &coeffs, &[IndexSet::empty()], &[8, 4, 2]).unwrap();
        assert!(m[0].iter().all(|&(v, se)| v == 0.0 && se == 0.0));
        assert!(modulus_moments(&bases, &coeffs, &[IndexSet::empty()], &[9]).is_err());
    }

    #[test]
    fn rough_kernel_rejected() {
        let mut cfg = ExperimentConfig::new("uniform-modulus", super::super::config::KernelSpec::fbm(0.28), 16);
        cfg.samples = 2;
        assert_eq!(run_uniform_modulus(&cfg).unwrap_err().exit_code(), 2);
    }
}
