//! TOML configuration.
//!
//! ```toml
//! n = 12                 # scaling count
//! n_scaling = "total"    # or "per-group" (default)
//! b = 5.0
//! seed = 7
//!
//! [service]
//! kind = "exponential"   # rate = ..; geometric: p = ..; deterministic: v = ..
//! rate = 0.3333333333
//!
//! [[groups]]
//! d = 1
//! count = 12             # optional, defaults to `n` under per-group scaling
//! ```
//!
//! A preset additionally carries a `[sweep]` table, see [`SweepConfig`].

use std::path::Path;

use aoi_grr_core::{GroupSpec, ModelError, NScaling, ServiceLaw, SystemSpec};
use serde::Deserialize;

use crate::sweep::SweepConfig;

/// Environment variable overriding the configured seed.
pub const SEED_ENV: &str = "AOI_GRR_SEED";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid configuration: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid system: {0}")]
    Model(#[from] ModelError),
    #[error("group {0} needs an explicit count (n is not a per-group size)")]
    MissingCount(usize),
    #[error("{SEED_ENV} is not an unsigned integer: {0:?}")]
    BadSeed(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Scaling {
    Total,
    #[default]
    PerGroup,
}

impl From<Scaling> for NScaling {
    fn from(s: Scaling) -> Self {
        match s {
            Scaling::Total => NScaling::TotalSources,
            Scaling::PerGroup => NScaling::PerGroupSize,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ServiceConfig {
    Exponential { rate: f64 },
    Geometric { p: f64 },
    Deterministic { v: f64 },
}

impl From<ServiceConfig> for ServiceLaw {
    fn from(s: ServiceConfig) -> Self {
        match s {
            ServiceConfig::Exponential { rate } => ServiceLaw::Exponential { rate },
            ServiceConfig::Geometric { p } => ServiceLaw::Geometric { p },
            ServiceConfig::Deterministic { v } => ServiceLaw::Deterministic { value: v },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupConfig {
    pub d: u32,
    pub count: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub n: Option<usize>,
    #[serde(default)]
    pub n_scaling: Scaling,
    pub b: f64,
    #[serde(default)]
    pub seed: u64,
    pub service: ServiceConfig,
    pub groups: Vec<GroupConfig>,
    pub sweep: Option<SweepConfig>,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    /// The system with group counts resolved.
    pub fn system(&self) -> Result<SystemSpec, ConfigError> {
        let groups = self
            .groups
            .iter()
            .enumerate()
            .map(|(k, g)| {
                let count = g
                    .count
                    .or(self.n.filter(|_| self.n_scaling == Scaling::PerGroup))
                    .ok_or(ConfigError::MissingCount(k + 1))?;
                Ok(GroupSpec::new(g.d, count))
            })
            .collect::<Result<Vec<_>, ConfigError>>()?;
        let spec = SystemSpec::new(groups, self.b, self.service.into(), self.n_scaling.into())?;
        if let Some(n) = self.n {
            if spec.scale() != n as f64 {
                return Err(ConfigError::Invalid(format!(
                    "n = {n} does not match the scaling count {} implied by the groups",
                    spec.scale()
                )));
            }
        }
        Ok(spec)
    }

    /// Configured seed, overridden by `AOI_GRR_SEED` when set.
    pub fn seed(&self) -> Result<u64, ConfigError> {
        resolve_seed(self.seed, std::env::var(SEED_ENV).ok())
    }
}

pub(crate) fn resolve_seed(configured: u64, env: Option<String>) -> Result<u64, ConfigError> {
    match env {
        Some(s) => s.trim().parse().map_err(|_| ConfigError::BadSeed(s)),
        None => Ok(configured),
    }
}
