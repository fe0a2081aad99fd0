use crate::error::{Error, Result};
use crate::gaussian::{substream, GaussianSampler};
use crate::kl::{conditional_log_mc, level3_correction, project, IndexSet, KlBasis, LieEstimate};
use crate::lift::{signature_between, SamplePath};
use crate::tensor::{LieElement, TensorElement};

use super::config::{ExperimentConfig, IndexPolicy};
use super::records::{RecordContext, ResultRecord};
use super::stats::z_score;
use super::Model;

pub const DEFAULT_CONDITIONING_SIZE: usize = 4;

/// Largest componentwise `|z|` of `estimate - target` on one tensor level.
pub fn max_abs_z(estimate: &LieEstimate, target: &TensorElement, level: usize) -> f64 {
    estimate
        .mean
        .level(level)
        .iter()
        .zip(target.level(level))
        .zip(estimate.stderr.level(level))
        .map(|((m, t), se)| z_score(m - t, *se).abs())
        .fold(0.0, f64::max)
}

/// z-scores of one conditional check on `[t_s, t_t]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MartingaleCheck {
    pub s: usize,
    pub t: usize,
    pub level1: f64,
    pub level2: f64,
    pub level3: f64,
    pub level3_uncorrected: f64,
    pub correction_size: f64,
}

pub fn check_interval(
    bases: &[KlBasis],
    set: &IndexSet,
    x_a: &SamplePath,
    s: usize,
    t: usize,
    samples: usize,
    seed: u64,
) -> Result<MartingaleCheck> {
    let est = conditional_log_mc(bases, set, x_a, s, t, samples, seed)?;
    let log_a: LieElement = signature_between(x_a, 3, s, t)?.log();
    let corr = level3_correction(bases, set, x_a, s, t)?;
    let corrected = log_a.add(&corr)?;
    Ok(MartingaleCheck {
        s,
        t,
        level1: max_abs_z(&est, log_a.tensor(), 1),
        level2: max_abs_z(&est, log_a.tensor(), 2),
        level3: max_abs_z(&est, corrected.tensor(), 3),
        level3_uncorrected: max_abs_z(&est, log_a.tensor(), 3),
        correction_size: corr.tensor().level_norm(3),
    })
}

/// Node pairs `(0,n)`, `(0,n/2)` and `(n/4, 3n/4)`, deduplicated.
pub fn default_intervals(n: usize) -> Vec<(usize, usize)> {
    let mut out = vec![(0, n)];
    for pair in [(0, n / 2), (n / 4, 3 * n / 4)] {
        if pair.0 < pair.1 && !out.contains(&pair) {
            out.push(pair);
        }
    }
    out
}

pub fn run_martingale_checks(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    cfg.validate_lift()?;
    let samples = cfg.require_samples()?;
    if cfg.d < 2 {
        return Err(Error::config("martingale checks need d >= 2"));
    }
    let model = Model::new(cfg)?;
    let rank = model.rank();
    let size = cfg.m.first().copied().unwrap_or(DEFAULT_CONDITIONING_SIZE).min(rank);
    let set = match cfg.index_policy {
        IndexPolicy::Prefix => IndexSet::prefix(size),
        IndexPolicy::Random => IndexSet::random(rank, &mut substream(cfg.seed ^ 0x3a27, 0)),
    };
    let x = GaussianSampler::new(&model.cov, cfg.d, cfg.seed)?.draw(0);
    let x_a = project(&x, &model.bases, &set)?;

    let ctx = RecordContext::from_config(cfg);
    let m = Some(set.len());
    let mut out = Vec::new();
    for (k, &(s, t)) in default_intervals(cfg.n).iter().enumerate() {
        let c = check_interval(&model.bases, &set, &x_a, s, t, samples, cfg.seed.wrapping_add(1 + k as u64))?;
        let tag = format!("[{s},{t}]");
        out.push(ctx.record(m, format!("max_abs_z_level1{tag}"), c.level1, Some(1.0)));
        out.push(ctx.record(m, format!("max_abs_z_level2{tag}"), c.level2, Some(1.0)));
        out.push(ctx.record(m, format!("max_abs_z_level3{tag}"), c.level3, Some(1.0)));
        out.push(ctx.record(m, format!("max_abs_z_level3_uncorrected{tag}"), c.level3_uncorrected, Some(1.0)));
        out.push(ctx.record(m, format!("correction_norm{tag}"), c.correction_size, None));
    }

    // Unconditional mean: A = ∅, so X^A ≡ 0 and the residual is X itself.
    let zero = SamplePath::zeros(model.cov.grid().clone(), cfg.d)?;
    let est = conditional_log_mc(&model.bases, &IndexSet::empty(), &zero, 0, cfg.n, samples, cfg.seed.wrapping_add(1000))?;
    let origin = TensorElement::zero(cfg.d, 3)?;
    let worst = (1..=3).map(|l| max_abs_z(&est, &origin, l)).fold(0.0, f64::max);
    out.push(ctx.record(Some(0), "max_abs_z_unconditional_mean", worst, Some(1.0)));
    Ok(out)
}
