use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::envs::{FamilyKind, FamilyRanges};
use crate::error::{Error, Result};
use crate::mtbc::{ModelConfig, TrainConfig};
use crate::theory::{AscentOptions, DescentOptions, ReferenceOptions};

/// How demonstrations are drawn from each expert.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DemoSampling {
    /// i.i.d. from the exact discounted occupancy.
    #[default]
    Exact,
    /// Concatenated expert episodes of fixed length, trimmed.
    Rollout { horizon: usize },
}

/// Lists of source sizes `n` (per task), source task counts `t` and target
/// sizes `m`; every combination is one grid cell. Omitted lists default to
/// the two standard protocols over `demos_per_task`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<Vec<usize>>,
}

/// Settings for the bound-report sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsConfig {
    pub delta: f64,
    pub rademacher_draws: usize,
    pub ascent: AscentOptions,
    pub descent: DescentOptions,
    pub reference: ReferenceOptions,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        Self {
            delta: 0.05,
            rademacher_draws: 20,
            ascent: AscentOptions::default(),
            descent: DescentOptions::default(),
            reference: ReferenceOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub family: FamilyRanges,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demos_per_task: Option<usize>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub demos: DemoSampling,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub mtbc: TrainConfig,
    #[serde(default)]
    pub bc: TrainConfig,
    #[serde(default)]
    pub bounds: BoundsConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_seeds() -> Vec<u64> {
    (0..5).collect()
}

fn default_gamma() -> f64 {
    0.99
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

fn reject(location: &str, message: impl Into<String>) -> Error {
    Error::Config {
        location: location.into(),
        message: message.into(),
    }
}

fn check_positive(location: &str, values: &[usize]) -> Result<()> {
    if values.is_empty() {
        return Err(reject(location, "list must not be empty"));
    }
    if values.contains(&0) {
        return Err(reject(location, "values must be positive"));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn kind(&self) -> FamilyKind {
        self.family.kind()
    }

    /// `|D|`, explicit or the family default.
    pub fn base_demos(&self) -> usize {
        self.demos_per_task.unwrap_or_else(|| self.kind().default_demos_per_task())
    }

    /// Fills omitted optional fields so that the result serializes every
    /// setting. Grids default to `n in {1,2,4,8}|D|`, `t in {1,2,4,8}`,
    /// `m in {1,2}|D|`.
    pub fn resolved(mut self) -> Self {
        let d = self.base_demos();
        self.demos_per_task = Some(d);
        self.grid.n.get_or_insert_with(|| vec![d, 2 * d, 4 * d, 8 * d]);
        self.grid.t.get_or_insert_with(|| vec![1, 2, 4, 8]);
        self.grid.m.get_or_insert_with(|| vec![d, 2 * d]);
        self
    }

    pub fn n_values(&self) -> &[usize] {
        self.grid.n.as_deref().unwrap_or(&[])
    }

    pub fn t_values(&self) -> &[usize] {
        self.grid.t.as_deref().unwrap_or(&[])
    }

    pub fn m_values(&self) -> &[usize] {
        self.grid.m.as_deref().unwrap_or(&[])
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("grid.n", self.n_values())?;
        check_positive("grid.t", self.t_values())?;
        check_positive("grid.m", self.m_values())?;
        if self.demos_per_task == Some(0) {
            return Err(reject("demos_per_task", "must be positive"));
        }
        if self.seeds.is_empty() {
            return Err(reject("seeds", "list must not be empty"));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(reject("gamma", format!("must lie in [0, 1), got {}", self.gamma)));
        }
        if let DemoSampling::Rollout { horizon: 0 } = self.demos {
            return Err(reject("demos.horizon", "must be positive"));
        }
        self.model.validate().map_err(|e| reject("model", e.to_string()))?;
        self.mtbc.validate().map_err(|e| reject("mtbc", e.to_string()))?;
        self.bc.validate().map_err(|e| reject("bc", e.to_string()))?;
        let b = &self.bounds;
        if !(b.delta > 0.0 && b.delta < 1.0) {
            return Err(reject("bounds.delta", format!("must lie in (0, 1), got {}", b.delta)));
        }
        if b.rademacher_draws == 0 || b.ascent.restarts == 0 || b.ascent.steps == 0 || !(b.ascent.lr > 0.0) {
            return Err(reject("bounds", "draws, ascent restarts, steps and lr must be positive"));
        }
        b.descent.validate().map_err(|e| reject("bounds.descent", e.to_string()))?;
        if b.reference.steps == 0 || !(b.reference.lr > 0.0) {
            return Err(reject("bounds.reference", "steps and lr must be positive"));
        }
        Ok(())
    }

    /// TOML text of every setting, defaults included.
    pub fn dump(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| reject("<dump>", e.to_string()))
    }
}

/// Strict parse: unknown keys and invalid values are rejected, omitted
/// optional fields take their defaults.
pub fn parse_config_str(text: &str, origin: &str) -> Result<ExperimentConfig> {
    let raw: ExperimentConfig = toml::from_str(text).map_err(|e| {
        let location = match e.span() {
            Some(span) => {
                let line = text[..span.start.min(text.len())].matches('\n').count() + 1;
                format!("{origin}:{line}")
            }
            None => origin.to_string(),
        };
        reject(&location, e.message())
    })?;
    let cfg = raw.resolved();
    cfg.validate().map_err(|e| match e {
        Error::Config { location, message } => reject(&format!("{origin}: {location}"), message),
        other => other,
    })?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_str(&text, &path.display().to_string())
}
