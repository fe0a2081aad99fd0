use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::CovKernel;

use super::io::read_table_kernel;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    #[default]
    Brownian,
    Fbm,
    Table,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub kind: KernelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hurst: Option<f64>,
    /// CSV file for table kernels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

impl KernelSpec {
    pub fn brownian() -> Self {
        Self { kind: KernelKind::Brownian, hurst: None, path: None }
    }

    pub fn fbm(hurst: f64) -> Self {
        Self { kind: KernelKind::Fbm, hurst: Some(hurst), path: None }
    }

    pub fn build(&self) -> Result<CovKernel> {
        match self.kind {
            KernelKind::Brownian => Ok(CovKernel::Brownian),
            KernelKind::Fbm => {
                let h = self.hurst.ok_or_else(|| Error::config("fbm kernel needs `hurst`"))?;
                CovKernel::fbm(h).map_err(|e| Error::config(e.to_string()))
            }
            KernelKind::Table => {
                let path = self.path.as_ref().ok_or_else(|| Error::config("table kernel needs `path`"))?;
                Ok(CovKernel::Table(read_table_kernel(path)?))
            }
        }
    }

    /// Hurst parameter (1/2 for Brownian motion).
    pub fn hurst(&self) -> Option<f64> {
        match self.kind {
            KernelKind::Brownian => Some(0.5),
            KernelKind::Fbm | KernelKind::Table => self.hurst,
        }
    }

    /// `ρ = max(1, 1/(2H))`, or 1 for a table without a declared Hurst index.
    pub fn rho(&self) -> f64 {
        self.hurst().map(|h| (1.0 / (2.0 * h)).max(1.0)).unwrap_or(1.0)
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            KernelKind::Brownian => "brownian",
            KernelKind::Fbm => "fbm",
            KernelKind::Table => "table",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexPolicy {
    /// `A_m = {1, ..., m}`.
    #[default]
    Prefix,
    /// Random subsets, each index kept with probability 1/2.
    Random,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvergenceMode {
    #[default]
    Kl,
    Dyadic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    /// JSON for a `.json` extension, CSV otherwise.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => OutputFormat::Json,
            _ => OutputFormat::Csv,
        }
    }
}

fn default_d() -> usize {
    2
}

fn default_q() -> f64 {
    2.0
}

/// Declarative experiment input, read from JSON with snake_case keys.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    #[serde(default)]
    pub kernel: KernelSpec,
    #[serde(default = "default_d")]
    pub d: usize,
    pub n: usize,
    /// KL levels (or coarse grid sizes in dyadic mode).
    #[serde(default)]
    pub m: Vec<usize>,
    #[serde(default)]
    pub index_policy: IndexPolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default = "default_q")]
    pub q: f64,
    #[serde(default)]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub mode: ConvergenceMode,
    /// Number of random index sets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subsets: Option<usize>,
    /// Exponent for `rhovar`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    /// Sample-path CSV consumed by `lift` and `pvar`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<OutputFormat>,
}

impl ExperimentConfig {
    pub fn new(experiment: &str, kernel: KernelSpec, n: usize) -> Self {
        Self {
            experiment: experiment.to_string(),
            kernel,
            d: default_d(),
            n,
            m: Vec::new(),
            index_policy: IndexPolicy::Prefix,
            p: None,
            q: default_q(),
            samples: 0,
            seed: 0,
            out: None,
            mode: ConvergenceMode::Kl,
            subsets: None,
            rho: None,
            input: None,
            format: None,
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    /// Basic shape checks shared by every experiment.
    pub fn validate_basic(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::config("grid size n must be positive"));
        }
        if self.d == 0 {
            return Err(Error::config("dimension d must be positive"));
        }
        if !(self.q >= 1.0) {
            return Err(Error::config(format!("moment q must be >= 1, got {}", self.q)));
        }
        if self.kernel.kind == KernelKind::Fbm {
            match self.kernel.hurst {
                Some(h) if h > 0.0 && h < 1.0 => {}
                other => return Err(Error::config(format!("fbm needs 0 < hurst < 1, got {other:?}"))),
            }
        }
        Ok(())
    }

    /// Checks for experiments that lift the process to `G^3`: `H > 1/4`.
    pub fn validate_lift(&self) -> Result<()> {
        self.validate_basic()?;
        if let Some(h) = self.kernel.hurst() {
            if h <= 0.25 {
                return Err(Error::config(format!("lifting needs hurst > 1/4, got {h}")));
            }
        }
        Ok(())
    }

    /// The p-variation exponent, checked against `p > 2ρ`.
    pub fn checked_p(&self) -> Result<f64> {
        let p = self.p.ok_or_else(|| Error::config("this experiment needs `p`"))?;
        let rho = self.kernel.rho();
        if !(p > 2.0 * rho) {
            return Err(Error::config(format!("need p > 2ρ = {}, got p = {p}", 2.0 * rho)));
        }
        Ok(p)
    }

    pub fn require_power_of_two(&self) -> Result<()> {
        if !self.n.is_power_of_two() {
            return Err(Error::config(format!("dyadic mode needs n to be a power of two, got {}", self.n)));
        }
        Ok(())
    }

    pub fn require_samples(&self) -> Result<usize> {
        if self.samples == 0 {
            return Err(Error::config("this experiment needs samples > 0"));
        }
        Ok(self.samples)
    }
}
