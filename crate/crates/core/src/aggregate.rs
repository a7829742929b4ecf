//! Sentence score re-weighting and summary-level aggregation.
//!
//! For a summary of `j` sentences with raw scores `s_i`, normalized depth
//! scores `x_i` and subtree heights `h_i`:
//!
//! ```text
//! f(s_i)  = s_i ^ (1 + (mean(x_1..x_j) - x_i))
//! s_i*    = f(s_i) ^ (1 + h_i * alpha)
//! ```
//!
//! Raw scores are clamped to `[epsilon, 1]` before exponentiation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 1.0;
pub const DEFAULT_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Mean,
    Min,
    ReweightedMean,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Mean => "mean",
            Strategy::Min => "min",
            Strategy::ReweightedMean => "reweighted_mean",
        })
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Strategy::Mean),
            "min" => Ok(Strategy::Min),
            "reweighted_mean" => Ok(Strategy::ReweightedMean),
            other => Err(Error::invalid(format!("unknown aggregation strategy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AggregationConfig {
    pub strategy: Strategy,
    pub alpha: f64,
    pub epsilon: f64,
}

impl Default for AggregationConfig {
    fn default() -> Self {
        AggregationConfig { strategy: Strategy::ReweightedMean, alpha: DEFAULT_ALPHA, epsilon: DEFAULT_EPSILON }
    }
}

impl AggregationConfig {
    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        check_epsilon(self.epsilon)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(Error::invalid(format!("alpha must be finite and non-negative, got {alpha}")));
    }
    Ok(())
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon <= 0.01) {
        return Err(Error::invalid(format!("epsilon must lie in (0, 0.01], got {epsilon}")));
    }
    Ok(())
}

fn check_unit(name: &str, values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !(0.0..=1.0).contains(v)) {
        Some(i) => Err(Error::invalid(format!("{name}[{i}] = {} is outside [0, 1]", values[i]))),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SentenceScore {
    pub sentence_index: usize,
    pub raw: f64,
    pub depth_norm: f64,
    pub height: f64,
    pub reweighted: f64,
}

/// Maximum over each sentence's segment scores.
pub fn max_over_segments(matrix: &[Vec<f64>]) -> Result<Vec<f64>> {
    matrix
        .iter()
        .enumerate()
        .map(|(i, row)| {
            if row.is_empty() {
                return Err(Error::invalid(format!("sentence {} has no segment scores", i + 1)));
            }
            check_unit("segment score", row)?;
            Ok(row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        })
        .collect()
}

pub fn reweight(
    scores: &[f64],
    depth_norms: &[f64],
    heights: &[f64],
    alpha: f64,
    epsilon: f64,
) -> Result<Vec<f64>> {
    if scores.len() != depth_norms.len() || scores.len() != heights.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} scores, {} depth norms, {} heights",
            scores.len(),
            depth_norms.len(),
            heights.len()
        )));
    }
    if scores.is_empty() {
        return Err(Error::invalid("nothing to re-weight"));
    }
    check_alpha(alpha)?;
    check_epsilon(epsilon)?;
    check_unit("score", scores)?;
    check_unit("depth norm", depth_norms)?;
    if let Some(i) = heights.iter().position(|h| !(h.is_finite() && *h >= 0.0)) {
        return Err(Error::invalid(format!("height[{i}] = {} must be finite and non-negative", heights[i])));
    }
    let n = depth_norms.len() as f64;
    Ok(scores
        .iter()
        .zip(depth_norms)
        .zip(heights)
        .map(|((&s, &x), &h)| {
            // mean(x) - x_i as the mean of differences, exactly 0 for uniform x
            let offset = depth_norms.iter().map(|&xj| xj - x).sum::<f64>() / n;
            let f = s.clamp(epsilon, 1.0).powf(1.0 + offset);
            f.powf(1.0 + h * alpha)
        })
        .collect())
}

/// Combines raw scores with optional per-sentence discourse features into
/// [`SentenceScore`]s. Sentences without features (no tree, or unaligned) get
/// height 0 and the mean depth norm of the others, which leaves their first
/// exponent at 1. If no sentence has features every `x` is 1.
pub fn score_sentences(
    raw: &[f64],
    features: &[Option<(f64, f64)>],
    config: &AggregationConfig,
) -> Result<Vec<SentenceScore>> {
    if raw.len() != features.len() {
        return Err(Error::invalid("raw scores and features differ in length"));
    }
    config.validate()?;
    let known: Vec<f64> = features.iter().flatten().map(|f| f.0).collect();
    let neutral = if known.is_empty() { 1.0 } else { known.iter().sum::<f64>() / known.len() as f64 };
    let x: Vec<f64> = features.iter().map(|f| f.map_or(neutral, |f| f.0)).collect();
    let h: Vec<f64> = features.iter().map(|f| f.map_or(0.0, |f| f.1)).collect();
    let reweighted = reweight(raw, &x, &h, config.alpha, config.epsilon)?;
    Ok((0..raw.len())
        .map(|i| SentenceScore {
            sentence_index: i + 1,
            raw: raw[i],
            depth_norm: x[i],
            height: h[i],
            reweighted: reweighted[i],
        })
        .collect())
}

pub fn aggregate_summary(scores: &[SentenceScore], config: &AggregationConfig) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::invalid("summary has no sentence scores"));
    }
    let n = scores.len() as f64;
    Ok(match config.strategy {
        Strategy::Mean => scores.iter().map(|s| s.raw).sum::<f64>() / n,
        Strategy::Min => scores.iter().map(|s| s.raw).fold(f64::INFINITY, f64::min),
        Strategy::ReweightedMean => scores.iter().map(|s| s.reweighted).sum::<f64>() / n,
    })
}
