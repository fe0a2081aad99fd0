//! Experiment driver: configuration, runners and result output.

pub mod basic;
pub mod bounds;
pub mod config;
pub mod convergence;
pub mod io;
pub mod martingale;
pub mod modulus;
pub mod records;
pub mod sanity;
pub mod stats;

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use crate::error::{Error, Result};
use crate::gaussian::{cov_matrix, CovMatrix};
use crate::kl::{kl_decompose, KlBasis};
use crate::lift::{GroupPath, SamplePath, TimeGrid};

pub use config::{ConvergenceMode, ExperimentConfig, IndexPolicy, KernelKind, KernelSpec, OutputFormat};
pub use records::{emit, RecordContext, ResultRecord, CSV_HEADER};

/// Covariance of the configured kernel on the uniform grid with `n` cells.
pub fn grid_covariance(cfg: &ExperimentConfig) -> Result<CovMatrix> {
    cov_matrix(&cfg.kernel.build()?, &TimeGrid::uniform(cfg.n)?)
}

/// Grid covariance with one KL basis per component.
pub(crate) struct Model {
    pub cov: CovMatrix,
    pub bases: Vec<KlBasis>,
}

impl Model {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let cov = grid_covariance(cfg)?;
        let basis = kl_decompose(&cov)?;
        Ok(Self { cov, bases: vec![basis; cfg.d] })
    }

    pub fn rank(&self) -> usize {
        self.bases[0].rank()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Lift,
    Pvar,
    Rhovar,
    KlConverge,
    UniformModulus,
    MartingaleCheck,
    TwovarBound,
    TranslateCheck,
}

impl Command {
    pub const ALL: [Command; 9] = [
        Command::Simulate,
        Command::Lift,
        Command::Pvar,
        Command::Rhovar,
        Command::KlConverge,
        Command::UniformModulus,
        Command::MartingaleCheck,
        Command::TwovarBound,
        Command::TranslateCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Lift => "lift",
            Command::Pvar => "pvar",
            Command::Rhovar => "rhovar",
            Command::KlConverge => "kl-converge",
            Command::UniformModulus => "uniform-modulus",
            Command::MartingaleCheck => "martingale-check",
            Command::TwovarBound => "twovar-bound",
            Command::TranslateCheck => "translate-check",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == name)
            .ok_or_else(|| Error::config(format!("unknown experiment `{name}`")))
    }
}

pub enum Output {
    Records(Vec<ResultRecord>),
    Samples(Vec<SamplePath>),
    Lifts(Vec<GroupPath>),
}

pub fn run(command: Command, cfg: &ExperimentConfig) -> Result<Output> {
    Ok(match command {
        Command::Simulate => Output::Samples(basic::simulate(cfg)?),
        Command::Lift => Output::Lifts(basic::lift(cfg)?),
        Command::Pvar => Output::Records(basic::pvar(cfg)?),
        Command::Rhovar => Output::Records(basic::rhovar(cfg)?),
        Command::KlConverge => Output::Records(convergence::run_convergence(cfg)?),
        Command::UniformModulus => Output::Records(modulus::run_uniform_modulus(cfg)?),
        Command::MartingaleCheck => Output::Records(martingale::run_martingale_checks(cfg)?),
        Command::TwovarBound => Output::Records(bounds::run_2var_bound(cfg)?),
        Command::TranslateCheck => Output::Records(bounds::run_translation_check(cfg)?),
    })
}

/// Writes records as CSV or JSON; sample paths and lifts are always CSV.
pub fn write_output(output: &Output, format: OutputFormat, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    match output {
        Output::Records(r) => emit(r, format, path),
        Output::Samples(s) => io::write_samples(s, BufWriter::new(File::create(path)?)),
        Output::Lifts(l) => io::write_lifts(l, BufWriter::new(File::create(path)?)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_names_round_trip() {
        for c in Command::ALL {
            assert_eq!(Command::from_name(c.name()).unwrap(), c);
        }
        assert_eq!(Command::from_name("nope").unwrap_err().exit_code(), 2);
    }
}
