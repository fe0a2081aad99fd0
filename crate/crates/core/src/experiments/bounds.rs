use rayon::prelude::*;

use crate::error::Result;
use crate::gaussian::{cov_matrix, substream, CovKernel, CovMatrix, GaussianSampler};
use crate::kl::{coefficients, kl_decompose, project_coefficients, IndexSet, KlBasis};
use crate::lift::{lift_pl, TimeGrid};
use crate::variation::{pvar_norm, rho_var_2d, PVarMode, RhoVarMode};

use super::config::{ExperimentConfig, KernelSpec};
use super::records::{RecordContext, ResultRecord};
use super::stats::lq_norm;
use super::Model;

pub const DEFAULT_BOUND_SUBSETS: usize = 200;
pub const DEFAULT_BOUND_HURST: f64 = 0.3;

/// Largest excess of the full-grid variations of `R^A` over their bounds:
/// `(2-var(R^A) - 2-var(R), ρ-var(R^A) - ρ-var(R) - Σ_{k∉A} ρ-var(h_k h_kᵀ))`.
pub fn bound_violations(cov: &CovMatrix, basis: &KlBasis, sets: &[IndexSet], rho: f64) -> Result<(f64, f64)> {
    let two = rho_var_2d(cov, 2.0, RhoVarMode::FullGrid)?;
    let full_rho = rho_var_2d(cov, rho, RhoVarMode::FullGrid)?;
    let rank = basis.rank();
    let single = (0..rank)
        .map(|k| rho_var_2d(&basis.partial_cov(&IndexSet::from_indices([k]))?, rho, RhoVarMode::FullGrid))
        .collect::<Result<Vec<_>>>()?;
    let per_set = sets
        .par_iter()
        .map(|set| -> Result<(f64, f64)> {
            let part = basis.partial_cov(set)?;
            let v2 = rho_var_2d(&part, 2.0, RhoVarMode::FullGrid)? - two;
            let slack: f64 = set.complement(rank).iter().map(|&k| single[k]).sum();
            let vr = rho_var_2d(&part, rho, RhoVarMode::FullGrid)? - full_rho - slack;
            Ok((v2, vr))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_set.iter().fold((f64::NEG_INFINITY, f64::NEG_INFINITY), |a, v| (a.0.max(v.0), a.1.max(v.1))))
}

pub fn run_2var_bound(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    cfg.validate_basic()?;
    let count = cfg.subsets.unwrap_or(DEFAULT_BOUND_SUBSETS);
    let hurst = match cfg.kernel.kind {
        super::config::KernelKind::Fbm => cfg.kernel.hurst.unwrap_or(DEFAULT_BOUND_HURST),
        _ => DEFAULT_BOUND_HURST,
    };
    let grid = TimeGrid::uniform(cfg.n)?;
    let mut out = Vec::new();
    for (spec, kernel) in [(KernelSpec::brownian(), CovKernel::Brownian), (KernelSpec::fbm(hurst), CovKernel::fbm(hurst)?)] {
        let cov = cov_matrix(&kernel, &grid)?;
        let basis = kl_decompose(&cov)?;
        let rank = basis.rank();
        let mut sets = vec![IndexSet::full(rank), IndexSet::empty()];
        sets.extend((0..count as u64).map(|a| IndexSet::random(rank, &mut substream(cfg.seed ^ 0x2fa7, a))));
        let (v2, vr) = bound_violations(&cov, &basis, &sets, spec.rho())?;
        let ctx = RecordContext {
            kernel: spec.name().to_string(),
            hurst: spec.hurst(),
            samples: sets.len(),
            ..RecordContext::from_config(cfg)
        };
        out.push(ctx.record(None, "max_violation_2var", v2, None));
        out.push(ctx.record(None, "max_violation_rhovar", vr, None));
    }
    Ok(out)
}

pub const DEFAULT_TRANSLATION_SAMPLES: usize = 50;

/// Largest `|project(x - g_a, A_b) - project(x, {a+1..b})|` over all
/// `0 <= a <= b <= K`, with `g_a = project(x, A_a)`.
pub fn translation_error(z: &[Vec<f64>], bases: &[KlBasis]) -> Result<f64> {
    let rank = bases[0].rank();
    let x = project_coefficients(z, bases, &IndexSet::full(rank))?;
    let mut worst = 0.0f64;
    for a in 0..=rank {
        let g = project_coefficients(z, bases, &IndexSet::prefix(a))?;
        let shifted = x.axpy(-1.0, &g)?;
        let zs = coefficients(&shifted, bases)?;
        for b in a..=rank {
            let lhs = project_coefficients(&zs, bases, &IndexSet::prefix(b))?;
            let rhs = project_coefficients(z, bases, &IndexSet::range(a, b))?;
            for (l, r) in lhs.components().iter().zip(rhs.components()) {
                for (u, v) in l.iter().zip(r) {
                    worst = worst.max((u - v).abs());
                }
            }
        }
    }
    Ok(worst)
}

pub fn run_translation_check(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    cfg.validate_lift()?;
    let p = cfg.checked_p()?;
    let samples = if cfg.samples == 0 { DEFAULT_TRANSLATION_SAMPLES } else { cfg.samples };
    let model = Model::new(cfg)?;
    let rank = model.rank();
    let mut levels: Vec<usize> = if cfg.m.is_empty() {
        (0..).map(|k| (1usize << k) - 1).take_while(|&a| a < rank).collect()
    } else {
        cfg.m.iter().map(|&a| a.min(rank)).collect()
    };
    if !levels.contains(&rank) {
        levels.push(rank);
    }
    let sampler = GaussianSampler::new(&model.cov, cfg.d, cfg.seed)?;
    let rows = (0..samples as u64)
        .into_par_iter()
        .map(|k| -> Result<(f64, Vec<f64>)> {
            let z = coefficients(&sampler.draw(k), &model.bases)?;
            let err = translation_error(&z, &model.bases)?;
            let norms = levels
                .iter()
                .map(|&a| pvar_norm(&lift_pl(&project_coefficients(&z, &model.bases, &IndexSet::range(a, rank))?, 3)?, p, PVarMode::Dp))
                .collect::<Result<Vec<_>>>()?;
            Ok((err, norms))
        })
        .collect::<Result<Vec<_>>>()?;
    let ctx = RecordContext { samples, ..RecordContext::from_config(cfg) };
    let worst = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    let mut out = vec![ctx.record(None, "max_translation_error", worst, None)];
    for (slot, &a) in levels.iter().enumerate() {
        let column: Vec<f64> = rows.iter().map(|r| r.1[slot]).collect();
        let (stat, se) = lq_norm(&column, cfg.q);
        out.push(ctx.record(Some(a), "tail_pvar_norm", stat, Some(se)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extreme_sets_do_not_violate() {
        let grid = TimeGrid::uniform(6).unwrap();
        let cov = cov_matrix(&CovKernel::fbm(0.3).unwrap(), &grid).unwrap();
        let basis = kl_decompose(&cov).unwrap();
        let (v2, vr) = bound_violations(&cov, &basis, &[IndexSet::full(basis.rank())], 1.0 / 0.6).unwrap();
        assert!(v2.abs() < 1e-12 && vr.abs() < 1e-12);
        let (v2, _) = bound_violations(&cov, &basis, &[IndexSet::empty()], 1.0 / 0.6).unwrap();
        assert!((v2 + rho_var_2d(&cov, 2.0, RhoVarMode::FullGrid).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn translation_on_small_grid() {
        let mut cfg = ExperimentConfig::new("translate-check", KernelSpec::brownian(), 8);
        cfg.p = Some(2.5);
        cfg.samples = 3;
        let recs = run_translation_check(&cfg).unwrap();
        assert!(recs[0].value < 1e-10);
        let last = recs.last().unwrap();
        assert_eq!((last.m, last.value), (Some(8), 0.0));
        let first = &recs[1];
        assert_eq!(first.m, Some(0));
        assert!(first.value > 0.0);
    }
}
