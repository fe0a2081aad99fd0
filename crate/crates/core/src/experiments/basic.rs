use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gaussian::sample;
use crate::lift::{lift_pl, GroupPath, SamplePath};
use crate::variation::{pvar_norm, rho_var_2d, PVarMode, RhoVarMode, RHOVAR_BRUTE_MAX_SEGMENTS};

use super::config::ExperimentConfig;
use super::io::read_samples;
use super::records::{RecordContext, ResultRecord};
use super::stats::mean_se;
use super::grid_covariance;

pub fn simulate(cfg: &ExperimentConfig) -> Result<Vec<SamplePath>> {
    cfg.validate_basic()?;
    let count = cfg.require_samples()?;
    sample(&grid_covariance(cfg)?, cfg.d, count, cfg.seed)
}

/// Paths from `cfg.input` when given, fresh samples otherwise.
fn load_or_simulate(cfg: &ExperimentConfig) -> Result<Vec<SamplePath>> {
    match &cfg.input {
        Some(path) => read_samples(path),
        None => {
            cfg.validate_lift()?;
            simulate(cfg)
        }
    }
}

pub fn lift(cfg: &ExperimentConfig) -> Result<Vec<GroupPath>> {
    load_or_simulate(cfg)?.par_iter().map(|x| lift_pl(x, 3)).collect()
}

pub fn pvar(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    let p = cfg.checked_p()?;
    let paths = load_or_simulate(cfg)?;
    let norms = paths
        .par_iter()
        .map(|x| pvar_norm(&lift_pl(x, 3)?, p, PVarMode::Dp))
        .collect::<Result<Vec<_>>>()?;
    let n = paths.first().map_or(cfg.n, |x| x.grid().num_segments());
    let ctx = RecordContext { n, samples: norms.len(), ..RecordContext::from_config(cfg) };
    let mut out: Vec<ResultRecord> =
        norms.iter().enumerate().map(|(k, v)| ctx.record(None, format!("pvar_norm#{k}"), *v, None)).collect();
    if !norms.is_empty() {
        let (mean, se) = mean_se(&norms);
        out.push(ctx.record(None, "pvar_norm_mean", mean, Some(se)));
    }
    Ok(out)
}

pub fn rhovar(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    cfg.validate_basic()?;
    let rho = cfg.rho.unwrap_or_else(|| cfg.kernel.rho());
    if !(rho >= 1.0) {
        return Err(Error::config(format!("rho must be >= 1, got {rho}")));
    }
    let cov = grid_covariance(cfg)?;
    let ctx = RecordContext { p: Some(rho), q: None, samples: 0, ..RecordContext::from_config(cfg) };
    let mut out = vec![
        ctx.record(None, "rhovar_fullgrid", rho_var_2d(&cov, rho, RhoVarMode::FullGrid)?, None),
        ctx.record(None, "rhovar_hillclimb", rho_var_2d(&cov, rho, RhoVarMode::HillClimb { seed: cfg.seed })?, None),
    ];
    if cfg.n <= RHOVAR_BRUTE_MAX_SEGMENTS {
        out.push(ctx.record(None, "rhovar_brute", rho_var_2d(&cov, rho, RhoVarMode::Brute)?, None));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::config::KernelSpec;

    #[test]
    fn brownian_rhovar_modes_agree() {
        let mut cfg = ExperimentConfig::new("rhovar", KernelSpec::brownian(), 6);
        cfg.rho = Some(1.0);
        let recs = rhovar(&cfg).unwrap();
        assert_eq!(recs.len(), 3);
        for r in &recs {
            assert!((r.value - 1.0).abs() < 1e-12, "{}", r.statistic);
        }
    }

    #[test]
    fn pvar_records_per_sample() {
        let mut cfg = ExperimentConfig::new("pvar", KernelSpec::brownian(), 8);
        cfg.samples = 3;
        cfg.p = Some(2.5);
        let recs = pvar(&cfg).unwrap();
        assert_eq!(recs.len(), 4);
        assert_eq!(recs[3].statistic, "pvar_norm_mean");
        assert!(recs[3].stderr.is_some());
    }
}
