//! Verification harness: configuration, check suites and the report.

pub mod config;
pub mod report;
pub mod suites;

pub use config::{BoundaryConfig, Precision, RunConfig, ThetaSource, PRECISION_ENV};
pub use report::{Check, RootRow, SpectrumRow, SpectrumTable, VerificationReport, SCHEMA_VERSION};
pub use suites::{run_suite, Suite, SuiteOutput};

use crate::error::{Error, Result};
use crate::linalg::Extended;

/// Run the named command (`all` or a suite name) and assemble the report.
pub fn run(command: &str, cfg: &RunConfig) -> Result<VerificationReport> {
    cfg.validate()?;
    let suites: Vec<Suite> = if command == "all" {
        Suite::ALL.to_vec()
    } else {
        vec![Suite::from_name(command).ok_or_else(|| Error::Config(format!("unknown command {command:?}")))?]
    };
    let mut report = VerificationReport::new(command, cfg);
    for suite in suites {
        let out = match cfg.precision() {
            Precision::Double => run_suite::<f64>(suite, cfg),
            Precision::Extended => run_suite::<Extended>(suite, cfg),
        };
        report.checks.extend(out.checks);
        report.measurements.extend(out.measurements);
        report.spectra.extend(out.spectra);
        report.roots.extend(out.roots);
        report.warnings.extend(out.warnings);
    }
    report.finish();
    Ok(report)
}
