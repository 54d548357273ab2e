//! One configuration document for every command-line entry point.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::consistency::Tolerances;
use crate::embedding::{DimKind, GroupSchema};
use crate::transform::DEFAULT_MISSING_PENALTY;
use crate::versiontree::{HeuristicParams, TreeConfig, DEFAULT_N_MAX};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Dot,
    #[default]
    Document,
    Csv,
}

impl std::str::FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "dot" => Ok(Self::Dot),
            "document" => Ok(Self::Document),
            "csv" => Ok(Self::Csv),
            other => Err(format!("unknown format {other:?} (expected dot, document or csv)")),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("config is malformed: {0}")]
    Format(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub tolerances: Tolerances,
    pub heuristic: HeuristicParams,
    pub n_max: usize,
    /// Buckets for every text dimension; `None` keeps the schema table's.
    pub text_dims: Option<usize>,
    pub missing_penalty: f64,
    pub format: OutputFormat,
    /// `check` fails when any record's aggregate score exceeds this.
    pub fail_over: f64,
}

impl Default for CliConfig {
    fn default() -> Self {
        Self {
            tolerances: Tolerances::default(),
            heuristic: HeuristicParams::default(),
            n_max: DEFAULT_N_MAX,
            text_dims: None,
            missing_penalty: DEFAULT_MISSING_PENALTY,
            format: OutputFormat::default(),
            fail_over: 0.0,
        }
    }
}

impl CliConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.tolerances.validate().map_err(ConfigError::Invalid)?;
        self.tree().validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if let Some(d) = self.text_dims {
            if !(2..=4096).contains(&d) {
                return Err(ConfigError::Invalid(format!("text_dims must be in 2..=4096, got {d}")));
            }
        }
        if !(0.0..=1.0).contains(&self.fail_over) {
            return Err(ConfigError::Invalid(format!("fail_over must be in [0, 1], got {}", self.fail_over)));
        }
        Ok(())
    }

    pub fn tree(&self) -> TreeConfig {
        TreeConfig { heuristic: self.heuristic.clone(), n_max: self.n_max, missing_penalty: self.missing_penalty }
    }

    /// `schemas` with every text dimension resized to `text_dims`, if set.
    pub fn apply_text_dims(&self, mut schemas: Vec<GroupSchema>) -> Vec<GroupSchema> {
        if let Some(d) = self.text_dims {
            for dim in schemas.iter_mut().flat_map(|s| s.dims.iter_mut()) {
                if let DimKind::Text { buckets } = &mut dim.kind {
                    *buckets = d;
                }
            }
        }
        schemas
    }
}
