//! Run configuration, read from TOML.
//!
//! ```toml
//! sites = 3
//! seed = 1
//! draws = 20
//! precision = "double"      # or "extended"
//! thetas = "random"         # or [[0.1, 0.2], [-0.3, 0.0], [0.2, -0.1]]
//! direct_max_sites = 5
//!
//! [boundary]                # omit for a fresh random boundary per draw
//! p = [2.1, 0.2]
//! q = [1.4, -0.3]
//! xi_plus = [0.7, 0.2]      # both xi zero selects diagonal boundaries
//! xi_minus = [-0.5, 0.4]
//!
//! [tolerances]              # per-check overrides, keyed by check name
//! slavnov_bra = 1e-8
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::algebra::{BoundaryParams, ChainSpec};
use crate::error::{Error, Result};
use crate::linalg::C;
use crate::scalar_products::DIRECT_MAX_SITES;

/// Environment variable that sets the default precision.
pub const PRECISION_ENV: &str = "SEGMENT_BETHE_PRECISION";

/// Largest chain the harness accepts.
pub const MAX_SITES: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    Double,
    Extended,
}

impl std::str::FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "double" => Ok(Self::Double),
            "extended" => Ok(Self::Extended),
            other => Err(Error::Config(format!(
                "unknown precision {other:?}, expected \"double\" or \"extended\""
            ))),
        }
    }
}

impl Precision {
    /// Value of [`PRECISION_ENV`], if set.
    pub fn from_env() -> Result<Option<Self>> {
        match std::env::var(PRECISION_ENV) {
            Ok(v) if !v.trim().is_empty() => v.parse().map(Some),
            _ => Ok(None),
        }
    }
}

/// `[re, im]`.
pub type ComplexPair = [f64; 2];

fn to_c(z: ComplexPair) -> C<f64> {
    C::new(z[0], z[1])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ThetaSource {
    /// The literal string `"random"`.
    Random(String),
    Explicit(Vec<ComplexPair>),
}

impl Default for ThetaSource {
    fn default() -> Self {
        Self::Random("random".into())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryConfig {
    pub p: ComplexPair,
    pub q: ComplexPair,
    #[serde(default)]
    pub xi_plus: ComplexPair,
    #[serde(default)]
    pub xi_minus: ComplexPair,
}

impl BoundaryConfig {
    pub fn params(&self) -> Result<BoundaryParams<f64>> {
        BoundaryParams::new(to_c(self.p), to_c(self.q), to_c(self.xi_plus), to_c(self.xi_minus))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_sites")]
    pub sites: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_draws")]
    pub draws: usize,
    /// `None` until resolved against flags and the environment.
    #[serde(default)]
    pub precision: Option<Precision>,
    #[serde(default)]
    pub thetas: ThetaSource,
    #[serde(default)]
    pub boundary: Option<BoundaryConfig>,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default = "default_direct_max")]
    pub direct_max_sites: usize,
}

fn default_sites() -> usize {
    2
}

fn default_draws() -> usize {
    1
}

fn default_direct_max() -> usize {
    DIRECT_MAX_SITES
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            sites: default_sites(),
            seed: 0,
            draws: default_draws(),
            precision: None,
            thetas: ThetaSource::default(),
            boundary: None,
            tolerances: BTreeMap::new(),
            direct_max_sites: default_direct_max(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Structural checks; genericity of explicit values included.
    pub fn validate(&self) -> Result<()> {
        if self.sites == 0 || self.sites > MAX_SITES {
            return Err(Error::Config(format!(
                "sites must be in 1..={MAX_SITES}, got {}",
                self.sites
            )));
        }
        if self.draws == 0 {
            return Err(Error::Config("draws must be at least 1".into()));
        }
        match &self.thetas {
            ThetaSource::Random(s) if s == "random" => {}
            ThetaSource::Random(s) => {
                return Err(Error::Config(format!(
                    "thetas must be \"random\" or a list of [re, im] pairs, got {s:?}"
                )))
            }
            ThetaSource::Explicit(list) => {
                if list.len() != self.sites {
                    return Err(Error::Config(format!(
                        "{} thetas given for {} sites",
                        list.len(),
                        self.sites
                    )));
                }
                self.explicit_thetas().expect("explicit")?;
            }
        }
        if let Some(b) = &self.boundary {
            b.params()?;
        }
        for (name, tol) in &self.tolerances {
            if !(tol.is_finite() && *tol >= 0.0) {
                return Err(Error::Config(format!("tolerance for {name} must be finite and >= 0")));
            }
        }
        Ok(())
    }

    pub fn explicit_thetas(&self) -> Option<Result<ChainSpec<f64>>> {
        match &self.thetas {
            ThetaSource::Explicit(list) => Some(ChainSpec::new(list.iter().copied().map(to_c).collect())),
            ThetaSource::Random(_) => None,
        }
    }

    /// Flag, then file, then [`PRECISION_ENV`], then double.
    pub fn resolve_precision(&mut self, flag: Option<Precision>, env: Option<Precision>) {
        self.precision = Some(flag.or(self.precision).or(env).unwrap_or(Precision::Double));
    }

    pub fn precision(&self) -> Precision {
        self.precision.unwrap_or(Precision::Double)
    }

    pub fn tolerance(&self, name: &str, default: f64) -> f64 {
        self.tolerances.get(name).copied().unwrap_or(default)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_schema() {
        let cfg = RunConfig::from_toml(
            r#"
            sites = 2
            seed = 7
            draws = 3
            precision = "extended"
            thetas = [[0.1, 0.2], [-0.3, 0.0]]
            [boundary]
            p = [2.1, 0.2]
            q = [1.4, -0.3]
            xi_plus = [0.7, 0.2]
            xi_minus = [-0.5, 0.4]
            [tolerances]
            ybe = 1e-13
            "#,
        )
        .unwrap();
        assert_eq!(cfg.sites, 2);
        assert_eq!(cfg.precision, Some(Precision::Extended));
        assert_eq!(cfg.tolerance("ybe", 1.0), 1e-13);
        assert_eq!(cfg.tolerance("other", 1.0), 1.0);
        assert!(!cfg.boundary.unwrap().params().unwrap().diagonal_mode);
    }

    #[test]
    fn defaults_and_precision_order() {
        let mut cfg = RunConfig::from_toml("").unwrap();
        assert_eq!(cfg.thetas, ThetaSource::default());
        cfg.resolve_precision(None, Some(Precision::Extended));
        assert_eq!(cfg.precision(), Precision::Extended);
        let mut cfg = RunConfig::from_toml("precision = \"double\"").unwrap();
        cfg.resolve_precision(None, Some(Precision::Extended));
        assert_eq!(cfg.precision(), Precision::Double);
        cfg.resolve_precision(Some(Precision::Extended), None);
        assert_eq!(cfg.precision(), Precision::Extended);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(RunConfig::from_toml("sites = 0").is_err());
        assert!(RunConfig::from_toml("thetas = \"fixed\"").is_err());
        assert!(RunConfig::from_toml("sites = 2\nthetas = [[0.1, 0.0]]").is_err());
        assert!(RunConfig::from_toml("sites = 2\nthetas = [[0.1, 0.0], [0.1, 0.0]]").is_err());
        assert!(RunConfig::from_toml("unknown = 1").is_err());
        assert!(RunConfig::from_toml("[boundary]\np = [1.0, 0.0]\nq = [1.0, 0.0]\nxi_plus = [1.0, 0.0]").is_err());
        assert!("quad".parse::<Precision>().is_err());
    }
}
