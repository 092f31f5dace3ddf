//! Machine-readable verification report.
//!
//! The payload (everything except wall times) is a pure function of the
//! configuration and the crate version, so two runs with the same seed
//! serialize to identical bytes.

use std::collections::BTreeMap;

use serde::Serialize;

use super::config::RunConfig;

/// Bumped whenever a field changes meaning.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    /// Stable identifier; tolerance overrides use this key.
    pub name: String,
    /// The identity being checked.
    pub anchor: String,
    pub suite: String,
    pub draw: Option<usize>,
    /// `None` when the computation itself failed.
    pub residual: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<f64>,
}

impl Check {
    pub fn new(suite: &str, name: &str, anchor: &str, draw: Option<usize>, residual: f64, tolerance: f64) -> Self {
        let finite = residual.is_finite();
        Self {
            name: name.to_string(),
            anchor: anchor.to_string(),
            suite: suite.to_string(),
            draw,
            residual: finite.then_some(residual),
            tolerance,
            pass: finite && residual <= tolerance,
            error: (!finite).then(|| "non-finite residual".to_string()),
            wall_time_ms: None,
        }
    }

    pub fn failed(suite: &str, name: &str, anchor: &str, draw: Option<usize>, tolerance: f64, error: String) -> Self {
        Self {
            name: name.to_string(),
            anchor: anchor.to_string(),
            suite: suite.to_string(),
            draw,
            residual: None,
            tolerance,
            pass: false,
            error: Some(error),
            wall_time_ms: None,
        }
    }
}

/// One brute-force eigenvalue branch and its root set.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectrumRow {
    pub branch: usize,
    /// Eigenvalue of `t(w₀)`.
    pub eigenvalue: [f64; 2],
    pub magnons: Option<usize>,
    pub roots: Vec<[f64; 2]>,
    pub scaled_residual: Option<f64>,
    pub agreement: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectrumTable {
    pub draw: usize,
    pub w0: [f64; 2],
    pub rows: Vec<SpectrumRow>,
}

/// One root of one solved set.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RootRow {
    pub draw: usize,
    pub set: usize,
    pub branch: Option<usize>,
    pub index: usize,
    pub re: f64,
    pub im: f64,
    /// `|E(u_i, ū_i)|` divided by the sum of its term moduli.
    pub scaled_residual: f64,
    pub abs_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerificationReport {
    pub schema_version: u32,
    pub version: String,
    pub command: String,
    pub config: RunConfig,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<Check>,
    /// Non-gating numbers reported alongside the checks.
    pub measurements: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub spectra: Vec<SpectrumTable>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub roots: Vec<RootRow>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl VerificationReport {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config: config.clone(),
            seed: config.seed,
            passed: true,
            checks: vec![],
            measurements: BTreeMap::new(),
            spectra: vec![],
            roots: vec![],
            warnings: vec![],
        }
    }

    pub fn finish(&mut self) {
        self.passed = self.checks.iter().all(|c| c.pass);
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    /// Full JSON including wall times.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// JSON with wall times removed; byte-stable for a fixed seed.
    pub fn payload(&self) -> String {
        let mut stripped = self.clone();
        for c in &mut stripped.checks {
            c.wall_time_ms = None;
        }
        serde_json::to_string_pretty(&stripped).expect("report serializes")
    }

    /// `draw,set,branch,index,re,im,scaled_residual,abs_residual` rows.
    pub fn roots_csv(&self) -> String {
        let mut out = String::from("draw,set,branch,index,re,im,scaled_residual,abs_residual\n");
        for r in &self.roots {
            let branch = r.branch.map(|b| b.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{:e},{:e},{:e},{:e}\n",
                r.draw, r.set, branch, r.index, r.re, r.im, r.scaled_residual, r.abs_residual
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn payload_drops_wall_time_and_non_finite_fails() {
        let mut r = VerificationReport::new("x", &RunConfig::default());
        let mut c = Check::new("s", "a", "x = x", Some(0), 1e-13, 1e-12);
        c.wall_time_ms = Some(3.5);
        r.checks.push(c);
        r.checks.push(Check::new("s", "b", "y = y", None, f64::NAN, 1.0));
        r.finish();
        assert!(!r.passed);
        assert!(r.to_json().contains("wall_time_ms"));
        assert!(!r.payload().contains("wall_time_ms"));
        assert_eq!(r.failures().count(), 1);
        assert!(r.payload().contains("\"residual\": null"));
    }

    #[test]
    fn csv_header_and_rows() {
        let mut r = VerificationReport::new("solve-bethe", &RunConfig::default());
        r.roots.push(RootRow {
            draw: 0,
            set: 1,
            branch: Some(2),
            index: 0,
            re: 0.5,
            im: -1.0,
            scaled_residual: 1e-15,
            abs_residual: 2e-14,
        });
        let csv = r.roots_csv();
        assert!(csv.starts_with("draw,set,branch"));
        assert_eq!(csv.lines().nth(1).unwrap(), "0,1,2,0,5e-1,-1e0,1e-15,2e-14");
    }
}
