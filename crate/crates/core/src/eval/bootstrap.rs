use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::eval::Metric;

pub const DEFAULT_RESAMPLES: usize = 10_000;
pub const MIN_RESAMPLES: usize = 1_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BootstrapResult {
    /// Share of resamples in which system A does not beat system B.
    pub p_value: f64,
    pub metric_a: f64,
    pub metric_b: f64,
    pub resamples: usize,
    /// Draws discarded because the metric was undefined on them.
    pub redraws: usize,
}

/// One-sided paired bootstrap test of "A improves over B".
///
/// Resample `r` draws item indices with replacement from a ChaCha8 stream
/// keyed by `(seed, r)`, so results do not depend on thread scheduling.
/// Draws on which the metric is undefined (e.g. a single-class sample for
/// ROC-AUC) are redrawn; more than `10 * resamples` redraws is an error.
pub fn paired_bootstrap(
    metric: Metric,
    gold: &[f64],
    scores_a: &[f64],
    scores_b: &[f64],
    resamples: usize,
    seed: u64,
) -> Result<BootstrapResult> {
    let n = gold.len();
    if scores_a.len() != n || scores_b.len() != n {
        return Err(Error::invalid("bootstrap vectors differ in length"));
    }
    if resamples < MIN_RESAMPLES {
        return Err(Error::invalid(format!("bootstrap needs at least {MIN_RESAMPLES} resamples")));
    }
    let metric_a = metric.compute(gold, scores_a)?;
    let metric_b = metric.compute(gold, scores_b)?;
    let cap = 10 * resamples;

    let outcomes: Vec<Result<(bool, usize)>> = (0..resamples)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            let mut g = vec![0.0; n];
            let mut a = vec![0.0; n];
            let mut b = vec![0.0; n];
            let mut redraws = 0;
            loop {
                for k in 0..n {
                    let i = rng.random_range(0..n);
                    g[k] = gold[i];
                    a[k] = scores_a[i];
                    b[k] = scores_b[i];
                }
                match (metric.compute(&g, &a), metric.compute(&g, &b)) {
                    (Ok(ma), Ok(mb)) => return Ok((ma <= mb, redraws)),
                    _ => {
                        redraws += 1;
                        if redraws > cap {
                            return Err(redraw_error(cap));
                        }
                    }
                }
            }
        })
        .collect();

    let mut not_better = 0;
    let mut redraws = 0;
    for outcome in outcomes {
        let (nb, r) = outcome?;
        not_better += usize::from(nb);
        redraws += r;
    }
    if redraws > cap {
        return Err(redraw_error(cap));
    }
    Ok(BootstrapResult {
        p_value: not_better as f64 / resamples as f64,
        metric_a,
        metric_b,
        resamples,
        redraws,
    })
}

fn redraw_error(cap: usize) -> Error {
    Error::invalid(format!("metric undefined on more than {cap} bootstrap draws"))
}
