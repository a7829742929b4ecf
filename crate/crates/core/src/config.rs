//! Run configuration, read from TOML and overridden by command-line flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::aggregate::AggregationConfig;
use crate::error::{Error, Result};
use crate::eval::{Metric, DEFAULT_RESAMPLES, MIN_RESAMPLES};
use crate::scorer::ScorerSpec;
use crate::segment::DEFAULT_CAPACITY;

pub const DEFAULT_SEED: u64 = 13;
pub const DEFAULT_OUTPUT_DIR: &str = "discofact-out";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentationConfig {
    /// Ignore trees and cut sentence windows.
    pub fallback: bool,
    /// Tree level whose frontier defines the segments; 1 is the root's children.
    pub level: u32,
    /// Word capacity per segment.
    pub capacity: usize,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        SegmentationConfig { fallback: false, level: 1, capacity: DEFAULT_CAPACITY }
    }
}

impl SegmentationConfig {
    /// The level to segment at, or `None` for sentence windows.
    pub fn effective_level(&self) -> Option<u32> {
        (!self.fallback).then_some(self.level)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Unset picks ROC-AUC for binary labels and Kendall's tau for continuous ones.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metric: Option<Metric>,
    pub bootstrap: usize,
    pub seed: u64,
    pub macro_average: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { metric: None, bootstrap: DEFAULT_RESAMPLES, seed: DEFAULT_SEED, macro_average: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
    pub output_dir: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cache: Option<PathBuf>,
    /// Pipeline threads across pairs; 0 means one per logical CPU.
    pub workers: usize,
    pub scorer: ScorerSpec,
    pub aggregation: AggregationConfig,
    pub segmentation: SegmentationConfig,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            manifest: None,
            output_dir: PathBuf::from(DEFAULT_OUTPUT_DIR),
            cache: None,
            workers: 0,
            scorer: ScorerSpec::default(),
            aggregation: AggregationConfig::default(),
            segmentation: SegmentationConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(input: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(input).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.scorer.validate()?;
        self.aggregation.validate()?;
        if self.segmentation.capacity == 0 {
            return Err(Error::Config("segmentation.capacity must be positive".into()));
        }
        if !self.segmentation.fallback && self.segmentation.level == 0 {
            return Err(Error::Config("segmentation.level must be at least 1".into()));
        }
        if self.eval.bootstrap < MIN_RESAMPLES {
            return Err(Error::Config(format!("eval.bootstrap must be at least {MIN_RESAMPLES}")));
        }
        Ok(())
    }

    /// Hash of every setting that can change a score or metric. Paths for
    /// output, cache and the worker count are left out.
    pub fn config_hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        c.cache = None;
        c.workers = 0;
        hex::encode(Sha256::digest(c.to_toml().as_bytes()))
    }

    pub fn manifest(&self) -> Result<&Path> {
        self.manifest.as_deref().ok_or_else(|| Error::Config("no manifest given".into()))
    }
}
