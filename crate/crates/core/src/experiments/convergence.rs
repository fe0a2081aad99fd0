use rand::seq::index;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gaussian::{substream, GaussianSampler};
use crate::kl::{coefficients, project_coefficients, IndexSet};
use crate::lift::{lift_pl, SamplePath, TimeGrid};
use crate::variation::pvar_holder_pair;

use super::config::{ConvergenceMode, ExperimentConfig, IndexPolicy};
use super::records::{RecordContext, ResultRecord};
use super::stats::lq_norm;
use super::Model;

pub const DEFAULT_KL_LEVELS: [usize; 5] = [4, 8, 16, 32, 64];

/// Index sets for the requested KL levels, clamped to the rank.
pub fn index_sets(levels: &[usize], rank: usize, policy: IndexPolicy, seed: u64) -> Vec<(usize, IndexSet)> {
    let mut out: Vec<(usize, IndexSet)> = Vec::new();
    for &m in levels {
        let m = m.min(rank);
        if out.iter().any(|(k, _)| *k == m) {
            continue;
        }
        let set = match policy {
            IndexPolicy::Prefix => IndexSet::prefix(m),
            IndexPolicy::Random => {
                let mut rng = substream(seed ^ 0x5eed_1e7e, m as u64);
                IndexSet::from_indices(index::sample(&mut rng, rank, m))
            }
        };
        out.push((m, set));
    }
    out
}

pub fn run_convergence(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    cfg.validate_lift()?;
    let p = cfg.checked_p()?;
    cfg.require_samples()?;
    match cfg.mode {
        ConvergenceMode::Kl => kl_convergence(cfg, p),
        ConvergenceMode::Dyadic => {
            cfg.require_power_of_two()?;
            dyadic_convergence(cfg, p)
        }
    }
}

fn kl_convergence(cfg: &ExperimentConfig, p: f64) -> Result<Vec<ResultRecord>> {
    let model = Model::new(cfg)?;
    let rank = model.rank();
    let levels = if cfg.m.is_empty() { DEFAULT_KL_LEVELS.to_vec() } else { cfg.m.clone() };
    let sets = index_sets(&levels, rank, cfg.index_policy, cfg.seed);
    let sampler = GaussianSampler::new(&model.cov, cfg.d, cfg.seed)?;
    let full = IndexSet::full(rank);

    // Per sample: [pvar_dist, holder_dist, pvar_tail, holder_tail] for each level.
    let rows = (0..cfg.samples as u64)
        .into_par_iter()
        .map(|k| -> Result<Vec<f64>> {
            let x = sampler.draw(k);
            let z = coefficients(&x, &model.bases)?;
            let lift_x = lift_pl(&project_coefficients(&z, &model.bases, &full)?, 3)?;
            let mut row = Vec::with_capacity(4 * sets.len());
            for (_, set) in &sets {
                let lift_a = lift_pl(&project_coefficients(&z, &model.bases, set)?, 3)?;
                let (pd, hd) = pvar_holder_pair(&lift_a, Some(&lift_x), p)?;
                let tail = project_coefficients(&z, &model.bases, &set.complement(rank))?;
                let (pt, ht) = pvar_holder_pair(&lift_pl(&tail, 3)?, None, p)?;
                row.extend([pd, hd, pt, ht]);
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;

    let ctx = RecordContext::from_config(cfg);
    let mut out = vec![ctx.record(None, "kl_rank", rank as f64, None)];
    let names = ["pvar_dist", "holder_dist", "pvar_tail_norm", "holder_tail_norm"];
    for (slot, (m, _)) in sets.iter().enumerate() {
        for (c, name) in names.iter().enumerate() {
            let column: Vec<f64> = rows.iter().map(|r| r[4 * slot + c]).collect();
            let (stat, se) = lq_norm(&column, cfg.q);
            out.push(ctx.record(Some(*m), *name, stat, Some(se)));
        }
    }
    Ok(out)
}

/// Piecewise-linear interpolation of `x` through every `stride`-th node,
/// evaluated back on the grid of `x`.
pub fn dyadic_interpolant(x: &SamplePath, coarse: usize) -> Result<SamplePath> {
    let n = x.grid().num_segments();
    if coarse == 0 || !n.is_multiple_of(coarse) {
        return Err(Error::input(format!("coarse size {coarse} does not divide {n}")));
    }
    let stride = n / coarse;
    let values = x.components().iter().map(|c| c.iter().step_by(stride).copied().collect()).collect();
    SamplePath::new(TimeGrid::uniform(coarse)?, values)?.resample(x.grid())
}

fn dyadic_convergence(cfg: &ExperimentConfig, p: f64) -> Result<Vec<ResultRecord>> {
    let n = cfg.n;
    let levels: Vec<usize> = if cfg.m.is_empty() {
        (0..n.trailing_zeros()).map(|k| 1usize << k).collect()
    } else {
        cfg.m.clone()
    };
    for &c in &levels {
        if !c.is_power_of_two() || c >= n {
            return Err(Error::config(format!("dyadic levels must be powers of two below n, got {c}")));
        }
    }
    let model = Model::new(cfg)?;
    let sampler = GaussianSampler::new(&model.cov, cfg.d, cfg.seed)?;
    let rows = (0..cfg.samples as u64)
        .into_par_iter()
        .map(|k| -> Result<Vec<f64>> {
            let x = sampler.draw(k);
            let mut row = Vec::with_capacity(2 * levels.len());
            for &c in &levels {
                let coarse = lift_pl(&dyadic_interpolant(&x, c)?, 3)?;
                let fine = lift_pl(&dyadic_interpolant(&x, 2 * c)?, 3)?;
                let (pd, hd) = pvar_holder_pair(&coarse, Some(&fine), p)?;
                row.extend([pd, hd]);
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let ctx = RecordContext::from_config(cfg);
    let mut out = Vec::new();
    for (slot, &c) in levels.iter().enumerate() {
        for (k, name) in ["pvar_dyadic_gap", "holder_dyadic_gap"].iter().enumerate() {
            let column: Vec<f64> = rows.iter().map(|r| r[2 * slot + k]).collect();
            let (stat, se) = lq_norm(&column, cfg.q);
            out.push(ctx.record(Some(c), *name, stat, Some(se)));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::config::KernelSpec;

    #[test]
    fn interpolant_on_full_grid_is_identity() {
        let grid = TimeGrid::uniform(4).unwrap();
        let x = SamplePath::new(grid, vec![vec![0.0, 1.0, -1.0, 2.0, 0.5]]).unwrap();
        assert_eq!(dyadic_interpolant(&x, 4).unwrap(), x);
        let half = dyadic_interpolant(&x, 2).unwrap();
        assert_eq!(half.component(0), &[0.0, -0.5, -1.0, -0.25, 0.5]);
        assert!(dyadic_interpolant(&x, 3).is_err());
    }

    #[test]
    fn full_level_gives_zero() {
        let mut cfg = ExperimentConfig::new("kl-converge", KernelSpec::fbm(0.4), 8);
        cfg.p = Some(2.6);
        cfg.samples = 3;
        cfg.m = vec![2, 100];
        let recs = run_convergence(&cfg).unwrap();
        let rank = recs[0].value as usize;
        assert_eq!(rank, 8);
        for r in recs.iter().filter(|r| r.m == Some(rank)) {
            assert_eq!(r.value, 0.0, "{}", r.statistic);
        }
        assert!(recs.iter().filter(|r| r.m == Some(2)).all(|r| r.value > 0.0));
    }

    #[test]
    fn rejects_small_p() {
        let mut cfg = ExperimentConfig::new("kl-converge", KernelSpec::fbm(0.35), 8);
        cfg.p = Some(2.5);
        cfg.samples = 1;
        assert_eq!(run_convergence(&cfg).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn random_policy_sets_have_requested_size() {
        let sets = index_sets(&[3, 5, 40], 10, IndexPolicy::Random, 1);
        assert_eq!(sets.iter().map(|(m, s)| (*m, s.len())).collect::<Vec<_>>(), vec![(3, 3), (5, 5), (10, 10)]);
    }
}
