use std::collections::HashMap;

use crate::error::Result;
use crate::scorer::{Backend, ScoreRequest};

/// Deterministic token-F1 scorer, used when no neural backend is configured.
#[derive(Debug, Clone, Copy, Default)]
pub struct BuiltinOverlap;

impl Backend for BuiltinOverlap {
    fn score(&self, requests: &[ScoreRequest]) -> Result<Vec<f64>> {
        Ok(requests.iter().map(|r| builtin_overlap(&r.premise, &r.hypothesis)).collect())
    }
}

fn tokens(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_lowercase).collect()
}

fn multiset_overlap(premise: &[String], hypothesis: &[String]) -> usize {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in premise {
        *counts.entry(t).or_default() += 1;
    }
    hypothesis
        .iter()
        .filter(|t| match counts.get_mut(t.as_str()) {
            Some(c) if *c > 0 => {
                *c -= 1;
                true
            }
            _ => false,
        })
        .count()
}

/// Precision over hypothesis tokens and recall over premise tokens of the
/// multiset token overlap.
pub fn overlap_precision_recall(premise: &str, hypothesis: &str) -> (f64, f64) {
    let p = tokens(premise);
    let h = tokens(hypothesis);
    if p.is_empty() || h.is_empty() {
        return (0.0, 0.0);
    }
    let overlap = multiset_overlap(&p, &h) as f64;
    (overlap / h.len() as f64, overlap / p.len() as f64)
}

/// Token F1 of lowercased whitespace tokens, `2|P∩H| / (|P| + |H|)`.
pub fn builtin_overlap(premise: &str, hypothesis: &str) -> f64 {
    let p = tokens(premise);
    let h = tokens(hypothesis);
    if p.is_empty() || h.is_empty() {
        return 0.0;
    }
    let overlap = multiset_overlap(&p, &h);
    2.0 * overlap as f64 / (p.len() + h.len()) as f64
}
