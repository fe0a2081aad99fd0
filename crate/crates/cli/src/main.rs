use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use gauss_rough::experiments::{run, write_output, Command, ExperimentConfig, OutputFormat};
use gauss_rough::Error;

/// Gaussian rough path experiments driven by JSON configs.
#[derive(Parser)]
#[command(name = "gauss-rough", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Draw sample paths on the grid (CSV: sample,component,node,time,value).
    Simulate(RunArgs),
    /// Lift sample paths to step-3 signatures (CSV: sample,node,time,word,value).
    Lift(RunArgs),
    /// p-variation norm of each lifted sample path.
    Pvar(RunArgs),
    /// 2D rho-variation of the grid covariance.
    Rhovar(RunArgs),
    /// Convergence of KL projections (or dyadic interpolations) in p-variation.
    KlConverge(RunArgs),
    /// Second-moment scaling of lifted projections over random index sets.
    UniformModulus(RunArgs),
    /// Conditional log-signature means against the exact level-3 correction.
    MartingaleCheck(RunArgs),
    /// 2-variation of partial covariances against the full covariance.
    TwovarBound(RunArgs),
    /// Translation identity of KL projections and tail-norm decay.
    TranslateCheck(RunArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Output file; defaults to `out` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output format; defaults to the config, then the file extension.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl Sub {
    fn split(self) -> (Command, RunArgs) {
        match self {
            Sub::Simulate(a) => (Command::Simulate, a),
            Sub::Lift(a) => (Command::Lift, a),
            Sub::Pvar(a) => (Command::Pvar, a),
            Sub::Rhovar(a) => (Command::Rhovar, a),
            Sub::KlConverge(a) => (Command::KlConverge, a),
            Sub::UniformModulus(a) => (Command::UniformModulus, a),
            Sub::MartingaleCheck(a) => (Command::MartingaleCheck, a),
            Sub::TwovarBound(a) => (Command::TwovarBound, a),
            Sub::TranslateCheck(a) => (Command::TranslateCheck, a),
        }
    }
}

fn execute(command: Command, args: RunArgs) -> Result<PathBuf, Error> {
    let mut cfg = ExperimentConfig::from_file(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let out = args
        .out
        .or_else(|| cfg.out.clone())
        .ok_or_else(|| Error::Config("no output path: pass --out or set `out` in the config".into()))?;
    let format = match args.format {
        Some(Format::Csv) => OutputFormat::Csv,
        Some(Format::Json) => OutputFormat::Json,
        None => cfg.format.unwrap_or_else(|| OutputFormat::from_path(&out)),
    };
    let output = run(command, &cfg)?;
    write_output(&output, format, &out)?;
    Ok(out)
}

fn main() -> ExitCode {
    let (command, args) = Cli::parse().command.split();
    match execute(command, args) {
        Ok(out) => {
            eprintln!("{}: wrote {}", command.name(), out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
