//! Run configuration: one TOML file drives the whole generation pipeline.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::debias::SplitRatios;
use crate::error::{Error, Result};
use crate::graph::SamplingStrategy;
use crate::seeding;

/// Split-construction parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    pub train: f64,
    pub val: f64,
    pub test_high: f64,
    pub skew: f64,
    pub rho: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            train: 0.7,
            val: 0.1,
            test_high: 0.2,
            skew: 1.5,
            rho: 0.3,
        }
    }
}

impl SplitConfig {
    pub fn ratios(&self) -> SplitRatios {
        SplitRatios {
            train: self.train,
            val: self.val,
            test_high: self.test_high,
        }
    }
}

/// Everything the `generate` pipeline needs besides the asset files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub catalog: PathBuf,
    pub rules: PathBuf,
    /// Optional template override; `None` uses the built-in templates.
    pub templates: Option<PathBuf>,
    pub agents: Vec<String>,
    pub num_videos: usize,
    pub chain_length_min: usize,
    pub chain_length_max: usize,
    /// Permuted variants kept per sampled chain.
    pub permutations_per_chain: usize,
    pub multipliers: Vec<f64>,
    pub gap_min: f64,
    pub gap_max: f64,
    pub strategy: SamplingStrategy,
    pub bins: usize,
    pub min_group_size: usize,
    pub icgf_rho: f64,
    pub split: SplitConfig,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            catalog: PathBuf::from("assets/catalog.txt"),
            rules: PathBuf::from("assets/rules.txt"),
            templates: None,
            agents: vec![
                "person".into(),
                "woman".into(),
                "man".into(),
                "child".into(),
                "robot".into(),
                "elderly person".into(),
            ],
            num_videos: 2000,
            chain_length_min: 4,
            chain_length_max: 8,
            permutations_per_chain: 4,
            multipliers: vec![0.5, 0.75, 1.0, 1.25, 1.5],
            gap_min: 0.0,
            gap_max: 2.0,
            strategy: SamplingStrategy::InverseCount,
            bins: 10,
            min_group_size: 10,
            icgf_rho: 0.3,
            split: SplitConfig::default(),
            seed: 42,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: PipelineConfig = toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: e.span().map(|s| text[..s.start].lines().count()).unwrap_or(0),
            message: e.message().to_string(),
        })?;
        // asset paths are relative to the config file
        if let Some(dir) = path.parent() {
            for p in [&mut config.catalog, &mut config.rules] {
                if p.is_relative() {
                    *p = dir.join(&p);
                }
            }
            if let Some(t) = &mut config.templates {
                if t.is_relative() {
                    *t = dir.join(&t);
                }
            }
        }
        if let Ok(seed) = std::env::var("TEMPOBENCH_SEED") {
            config.seed = seed.parse().map_err(|_| {
                Error::InvalidArgument(format!("TEMPOBENCH_SEED must be a u64, got {seed:?}"))
            })?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.agents.is_empty() {
            return Err(Error::InvalidArgument("agents must be non-empty".into()));
        }
        if self.num_videos == 0 {
            return Err(Error::InvalidArgument("num_videos must be > 0".into()));
        }
        if self.chain_length_min == 0 || self.chain_length_max < self.chain_length_min {
            return Err(Error::InvalidArgument(format!(
                "chain length bounds must satisfy 1 <= min <= max, got [{}, {}]",
                self.chain_length_min, self.chain_length_max
            )));
        }
        if self.permutations_per_chain == 0 {
            return Err(Error::InvalidArgument(
                "permutations_per_chain must be > 0".into(),
            ));
        }
        if self.multipliers.is_empty() || self.multipliers.iter().any(|&m| m <= 0.0) {
            return Err(Error::InvalidArgument(
                "multipliers must be non-empty and positive".into(),
            ));
        }
        if self.bins == 0 {
            return Err(Error::InvalidArgument("bins must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.icgf_rho) {
            return Err(Error::InvalidArgument(format!(
                "icgf_rho must be in [0, 1), got {}",
                self.icgf_rho
            )));
        }
        Ok(())
    }

    /// Hash of the canonical serialized configuration, for manifests.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("config is serializable");
        seeding::sha256_hex(json.as_bytes())
    }
}
