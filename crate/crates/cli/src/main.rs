//! `segment-bethe`: run verification suites and emit a JSON report.
//!
//! Exit status is 0 when every check passes, 1 when any check fails and 2 on
//! configuration errors.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, ValueEnum};
use segment_bethe_core::harness::{self, Precision, RunConfig, Suite};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Command {
    CheckAlgebra,
    Exchange,
    Spectrum,
    SolveBethe,
    Offshell,
    Slavnov,
    Norm,
    N1,
    All,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::CheckAlgebra => Suite::CheckAlgebra.name(),
            Command::Exchange => Suite::Exchange.name(),
            Command::Spectrum => Suite::Spectrum.name(),
            Command::SolveBethe => Suite::SolveBethe.name(),
            Command::Offshell => Suite::Offshell.name(),
            Command::Slavnov => Suite::Slavnov.name(),
            Command::Norm => Suite::Norm.name(),
            Command::N1 => Suite::N1.name(),
            Command::All => "all",
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PrecisionArg {
    Double,
    Extended,
}

impl From<PrecisionArg> for Precision {
    fn from(p: PrecisionArg) -> Self {
        match p {
            PrecisionArg::Double => Precision::Double,
            PrecisionArg::Extended => Precision::Extended,
        }
    }
}

/// Numerical verification of the modified algebraic Bethe ansatz for the
/// open XXX chain with general boundaries.
///
/// The JSON report goes to stdout, except for `solve-bethe`, which prints
/// the root table as CSV there. `--out` always receives the JSON report.
#[derive(Debug, Parser)]
#[command(name = "segment-bethe", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Number of sites (1 to 10; brute-force checks cap lower).
    #[arg(long)]
    sites: Option<usize>,
    /// Seed for every random draw.
    #[arg(long)]
    seed: Option<u64>,
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config file and SEGMENT_BETHE_PRECISION.
    #[arg(long, value_enum)]
    precision: Option<PrecisionArg>,
    /// Independent random draws per suite.
    #[arg(long)]
    draws: Option<usize>,
    /// Also write the JSON report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(n) = cli.sites {
        cfg.sites = n;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(d) = cli.draws {
        cfg.draws = d;
    }
    cfg.resolve_precision(cli.precision.map(Into::into), Precision::from_env()?);
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<bool> {
    let report = harness::run(cli.command.name(), &config(cli)?)?;
    let json = report.to_json();
    if let Some(path) = &cli.out {
        std::fs::write(path, &json).with_context(|| format!("writing {}", path.display()))?;
    }
    match cli.command {
        Command::SolveBethe => print!("{}", report.roots_csv()),
        _ => println!("{json}"),
    }
    for c in report.failures() {
        eprintln!(
            "FAIL {}/{} draw {:?}: residual {:?} > {:e}{}",
            c.suite,
            c.name,
            c.draw,
            c.residual,
            c.tolerance,
            c.error.as_deref().map(|e| format!(" ({e})")).unwrap_or_default()
        );
    }
    Ok(report.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
