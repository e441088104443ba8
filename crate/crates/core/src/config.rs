//! JSON run configurations for the command-line driver.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expander::ExpanderSetup;
use crate::field::SampledField;
use crate::flow::{Checks, FlowDomain, InitialData, RunOptions};
use crate::geometry::booster::{BoosterKind, GridSpec, DEFAULT_THETA};
use crate::inequality::CampaignConfig;
use crate::spectral::SymMatrix;

pub const SCHEMA_VERSION: u32 = 1;

/// Parses a config and checks its schema version.
pub fn parse<T: DeserializeOwned + Versioned>(text: &str) -> Result<T> {
    let cfg: T = serde_json::from_str(text)?;
    if cfg.schema_version() != SCHEMA_VERSION {
        return Err(Error::invalid(format!(
            "unsupported schema_version {} (expected {SCHEMA_VERSION})",
            cfg.schema_version()
        )));
    }
    Ok(cfg)
}

pub fn load<T: DeserializeOwned + Versioned>(path: &Path) -> Result<(T, Vec<u8>)> {
    let bytes = std::fs::read(path)?;
    let text = std::str::from_utf8(&bytes).map_err(|e| Error::invalid(format!("config is not UTF-8: {e}")))?;
    Ok((parse(text)?, bytes))
}

pub trait Versioned {
    fn schema_version(&self) -> u32;
}

macro_rules! versioned {
    ($($t:ty),*) => {$(
        impl Versioned for $t {
            fn schema_version(&self) -> u32 {
                self.schema_version
            }
        }
    )*};
}

versioned!(FlowConfig, VerifyConfig, ConeConfig, BoosterConfig, ExpanderConfig, RegularizeConfig);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainConfig {
    /// `u = ½xᵀA₀x + p` with `p` periodic on `[-L, L)ⁿ`.
    Periodic {
        a0: Vec<Vec<f64>>,
        half_width: f64,
        resolution: usize,
    },
    Radial {
        n: usize,
        half_width: f64,
        resolution: usize,
    },
    Line {
        half_width: f64,
        resolution: usize,
    },
}

impl DomainConfig {
    pub fn build(&self) -> Result<FlowDomain> {
        match self {
            DomainConfig::Periodic {
                a0,
                half_width,
                resolution,
            } => FlowDomain::periodic(SymMatrix::from_rows(a0)?, *half_width, *resolution),
            DomainConfig::Radial {
                n,
                half_width,
                resolution,
            } => FlowDomain::radial(*n, *half_width, *resolution),
            DomainConfig::Line { half_width, resolution } => FlowDomain::line(*half_width, *resolution),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    pub domain: DomainConfig,
    pub initial: InitialData,
    pub t_end: f64,
    pub sample_dt: f64,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    #[serde(default)]
    pub checks: Checks,
}

impl FlowConfig {
    pub fn run_options(&self, dump_path: Option<PathBuf>) -> RunOptions {
        RunOptions {
            t_end: self.t_end,
            sample_dt: self.sample_dt,
            dt: self.dt,
            snapshot_times: self.snapshot_times.clone(),
            checks: self.checks.clone(),
            dump_path,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub campaign: CampaignConfig,
}

fn default_cone_samples() -> usize {
    100_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConeConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    pub delta1: f64,
    pub delta2: f64,
    #[serde(default = "default_cone_samples")]
    pub samples: usize,
}

fn default_theta() -> f64 {
    DEFAULT_THETA
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayConfig {
    pub radius: f64,
    pub k_list: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoosterConfig {
    pub schema_version: u32,
    pub kind: BoosterKind,
    pub k: f64,
    pub tau: f64,
    #[serde(default = "default_theta")]
    pub theta: f64,
    pub grid: GridSpec,
    #[serde(default)]
    pub decay: Option<DecayConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpanderConfig {
    pub schema_version: u32,
    pub expander: ExpanderSetup,
    /// Bound on the profile residual at `t = 1`.
    #[serde(default = "default_residual_tol")]
    pub residual_tol: f64,
}

fn default_residual_tol() -> f64 {
    1e-8
}

/// Initial data for the regularization pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSource {
    /// `a|x|²/2` sampled on `[-L, L]^dim` with exact Hessians.
    Quadratic {
        dim: usize,
        a: f64,
        half_width: f64,
        spacing: f64,
    },
    Csv {
        path: PathBuf,
    },
}

impl FieldSource {
    pub fn build(&self) -> Result<SampledField> {
        match self {
            FieldSource::Quadratic {
                dim,
                a,
                half_width,
                spacing,
            } => {
                let hess = SymMatrix::identity(*dim)?.scale(*a);
                SampledField::centered_box(*dim, *half_width, *spacing, |x| {
                    0.5 * a * x.iter().map(|c| c * c).sum::<f64>()
                })?
                .with_hessian_fn(|_| hess.clone())
            }
            FieldSource::Csv { path } => SampledField::read_csv(std::fs::File::open(path)?),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularizeConfig {
    pub schema_version: u32,
    pub input: FieldSource,
    pub eps1: f64,
    pub eps2: f64,
    pub k: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flow_config_roundtrip() {
        let text = r#"{
            "schema_version": 1,
            "domain": {"mode": "periodic", "a0": [[1, 0], [0, -0.4]], "half_width": 3.0, "resolution": 16},
            "initial": {"builtin": "zero"},
            "t_end": 1.0,
            "sample_dt": 0.25,
            "checks": {"exact_quadratic_tol": 1e-12}
        }"#;
        let c: FlowConfig = parse(text).unwrap();
        assert_eq!(c.domain.build().unwrap().n, 2);
        assert_eq!(c.checks.exact_quadratic_tol, Some(1e-12));
        let again: FlowConfig = parse(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn rejects_version_and_unknown_fields() {
        let bad_version = r#"{"schema_version": 2, "delta1": 0.5, "delta2": 0.5}"#;
        assert!(matches!(parse::<ConeConfig>(bad_version), Err(Error::InvalidInput(_))));
        let unknown = r#"{"schema_version": 1, "delta1": 0.5, "delta2": 0.5, "extra": 0}"#;
        assert!(matches!(parse::<ConeConfig>(unknown), Err(Error::Json(_))));
        let nested = r#"{"schema_version": 1, "campaign": {"sample": 3}}"#;
        assert!(parse::<VerifyConfig>(nested).is_err());
    }

    #[test]
    fn quadratic_source() {
        let f = FieldSource::Quadratic {
            dim: 2,
            a: 1.0,
            half_width: 1.0,
            spacing: 0.5,
        }
        .build()
        .unwrap();
        assert_eq!(f.len(), 25);
        assert!(f.hessians().is_some());
    }
}
