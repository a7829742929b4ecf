//! Evaluation metrics and significance tests.

mod aspl;
mod bootstrap;
mod kendall;
mod roc;
mod ttest;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use aspl::{aspl, aspl_of_graph, tree_adjacency, NodeSet};
pub use bootstrap::{paired_bootstrap, BootstrapResult, DEFAULT_RESAMPLES, MIN_RESAMPLES};
pub use kendall::kendall_tau;
pub use roc::roc_auc;
pub use ttest::{welch_t_test, WelchResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    RocAuc,
    KendallTau,
}

impl Metric {
    /// Evaluates the metric. For [`Metric::RocAuc`] `gold` must hold 0/1 labels.
    pub fn compute(self, gold: &[f64], scores: &[f64]) -> Result<f64> {
        match self {
            Metric::RocAuc => {
                let labels = binary_labels(gold)?;
                roc_auc(&labels, scores)
            }
            Metric::KendallTau => kendall_tau(gold, scores),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::RocAuc => "roc_auc",
            Metric::KendallTau => "kendall_tau",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "roc_auc" | "auc" => Ok(Metric::RocAuc),
            "kendall_tau" | "tau" => Ok(Metric::KendallTau),
            other => Err(Error::invalid(format!("unknown metric {other:?}"))),
        }
    }
}

pub(crate) fn binary_labels(gold: &[f64]) -> Result<Vec<bool>> {
    gold.iter()
        .map(|&g| {
            if g == 1.0 {
                Ok(true)
            } else if g == 0.0 {
                Ok(false)
            } else {
                Err(Error::invalid(format!("binary label expected, got {g}")))
            }
        })
        .collect()
}

pub(crate) fn check_finite(name: &str, values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::invalid(format!("{name}[{i}] is not finite"))),
        None => Ok(()),
    }
}
