use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::generators::GeneratorSpec;
use crate::diagnostics::DivergenceSpec;
use crate::error::{GibbsError, Result};
use crate::losses::LossSpec;
use crate::model::CsvLayout;
use crate::priors::PriorSpec;
use crate::rates::RateSchedule;
use crate::sampler::MHConfig;

pub const SCHEMA_VERSION: u32 = 1;

/// Reads and parses a JSON config. Every failure is a [`GibbsError::Config`]
/// naming the file, with line and column for syntax or field errors.
pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| GibbsError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_json(&text).map_err(|e| match e {
        GibbsError::Config(msg) => GibbsError::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| GibbsError::Config(e.to_string()))?;
    match value.get("schema") {
        Some(v) if v.as_u64() == Some(SCHEMA_VERSION as u64) => {}
        Some(v) => return Err(GibbsError::Config(format!("unsupported schema {v}, expected {SCHEMA_VERSION}"))),
        None => return Err(GibbsError::Config(format!("missing field `schema` (expected {SCHEMA_VERSION})"))),
    }
    // re-parse from text so field errors carry positions
    serde_json::from_str(text).map_err(|e| GibbsError::Config(e.to_string()))
}

fn default_level() -> f64 {
    0.9
}

/// A replication study over a grid of sample sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ExperimentSpec {
    pub schema: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub generator: GeneratorSpec,
    pub loss: LossSpec,
    pub prior: PriorSpec,
    pub rate: RateSchedule,
    #[serde(default)]
    pub mh: MHConfig,
    pub divergence: DivergenceSpec,
    pub n_grid: Vec<usize>,
    /// Defaults per generator (MCID: 50 / 20); required otherwise.
    #[serde(default)]
    pub replications: Option<usize>,
    /// Count used with `--full`; MCID defaults to 250 / 100.
    #[serde(default)]
    pub full_replications: Option<usize>,
    pub base_seed: u64,
    /// Hold-out size for misclassification (MCID: 100 / 1000).
    #[serde(default)]
    pub holdout: Option<usize>,
    #[serde(default)]
    pub workers: Option<usize>,
    /// Posterior-radius quantile level.
    #[serde(default = "default_level")]
    pub radius_level: f64,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(GibbsError::Config(m));
        if self.schema != SCHEMA_VERSION {
            return cfg(format!("unsupported schema {}", self.schema));
        }
        if self.n_grid.is_empty() || self.n_grid.contains(&0) {
            return cfg("nGrid must be a nonempty list of positive sizes".into());
        }
        if self.replications(false) == 0 {
            return cfg("replications must be at least 1".into());
        }
        if !(self.radius_level > 0.0 && self.radius_level < 1.0) {
            return cfg(format!("radiusLevel {} outside (0, 1)", self.radius_level));
        }
        let wrap = |e: GibbsError| match e {
            GibbsError::Config(_) => e,
            other => GibbsError::Config(other.to_string()),
        };
        self.generator.validate()?;
        self.loss.validate().map_err(wrap)?;
        self.prior.validate().map_err(wrap)?;
        self.rate.validate().map_err(wrap)?;
        self.mh.validate().map_err(wrap)?;
        if self.rate.is_data_driven() && !matches!(self.loss, LossSpec::Auc) {
            return cfg("the data-driven rate applies to the AUC loss only".into());
        }
        Ok(())
    }

    pub fn replications(&self, full: bool) -> usize {
        let defaults = self.generator.default_replications();
        let desk = self.replications.or(defaults.map(|d| d.0)).unwrap_or(0);
        if full {
            self.full_replications.or(defaults.map(|d| d.1)).unwrap_or(desk)
        } else {
            desk
        }
    }

    pub fn holdout_size(&self) -> Option<usize> {
        self.holdout.or(self.generator.default_holdout())
    }
}

/// Where a single-chain run gets its data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Generate {
        generator: GeneratorSpec,
        n: usize,
        seed: u64,
    },
    /// A CSV file; relative paths are resolved against the config's directory.
    Csv {
        path: PathBuf,
        layout: CsvLayout,
    },
}

/// One chain on one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SampleSpec {
    pub schema: u32,
    pub data: DataSource,
    pub loss: LossSpec,
    pub prior: PriorSpec,
    pub rate: RateSchedule,
    #[serde(default)]
    pub mh: MHConfig,
    /// Credible level of the reported intervals.
    #[serde(default = "default_sample_level")]
    pub level: f64,
}

fn default_sample_level() -> f64 {
    0.95
}

/// Monte-Carlo check of the exponential-moment condition over a `θ` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct MgfSpec {
    pub schema: u32,
    pub generator: GeneratorSpec,
    pub loss: LossSpec,
    /// Defaults to the generator's point truth.
    #[serde(default)]
    pub theta_star: Option<Vec<f64>>,
    pub grid: Vec<Vec<f64>>,
    pub omega: f64,
    pub divergence: DivergenceSpec,
    #[serde(default = "default_r")]
    pub r: f64,
    pub mc_size: usize,
    pub seed: u64,
}

fn default_r() -> f64 {
    2.0
}
