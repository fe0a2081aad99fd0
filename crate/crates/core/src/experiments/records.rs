use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

use super::config::{ExperimentConfig, OutputFormat};

pub const CSV_HEADER: &str = "experiment,kernel,hurst,n,m,p,q,samples,statistic,value,stderr,seed";

/// One output row. Empty optional fields are written as empty CSV cells
/// and `null` in JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub experiment: String,
    pub kernel: String,
    pub hurst: Option<f64>,
    pub n: usize,
    pub m: Option<usize>,
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub samples: usize,
    pub statistic: String,
    pub value: f64,
    pub stderr: Option<f64>,
    pub seed: u64,
}

/// Fields shared by all records of one run.
#[derive(Clone, Debug)]
pub struct RecordContext {
    pub experiment: String,
    pub kernel: String,
    pub hurst: Option<f64>,
    pub n: usize,
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub samples: usize,
    pub seed: u64,
}

impl RecordContext {
    pub fn from_config(cfg: &ExperimentConfig) -> Self {
        Self {
            experiment: cfg.experiment.clone(),
            kernel: cfg.kernel.name().to_string(),
            hurst: cfg.kernel.hurst(),
            n: cfg.n,
            p: cfg.p,
            q: Some(cfg.q),
            samples: cfg.samples,
            seed: cfg.seed,
        }
    }

    pub fn record(&self, m: Option<usize>, statistic: impl Into<String>, value: f64, stderr: Option<f64>) -> ResultRecord {
        ResultRecord {
            experiment: self.experiment.clone(),
            kernel: self.kernel.clone(),
            hurst: self.hurst,
            n: self.n,
            m,
            p: self.p,
            q: self.q,
            samples: self.samples,
            statistic: statistic.into(),
            value,
            stderr,
            seed: self.seed,
        }
    }
}

pub fn to_csv_string(records: &[ResultRecord]) -> Result<String> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    for r in records {
        wtr.serialize(r)?;
    }
    let body = String::from_utf8(wtr.into_inner().map_err(|e| e.into_error())?)
        .expect("csv output is utf-8");
    Ok(format!("{CSV_HEADER}\n{body}"))
}

pub fn to_json_string(records: &[ResultRecord]) -> Result<String> {
    Ok(serde_json::to_string_pretty(records)? + "\n")
}

pub fn from_csv_str(text: &str) -> Result<Vec<ResultRecord>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    Ok(rdr.deserialize().collect::<std::result::Result<Vec<_>, _>>()?)
}

pub fn emit(records: &[ResultRecord], format: OutputFormat, path: &Path) -> Result<()> {
    let text = match format {
        OutputFormat::Csv => to_csv_string(records)?,
        OutputFormat::Json => to_json_string(records)?,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    Ok(())
}
