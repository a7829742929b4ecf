//! Sentence to EDU alignment by string matching.
//!
//! Both the sentence-segmented text and the tree text are reduced to a stream
//! of normalized characters: whitespace and control characters are dropped
//! and the rest lowercased. The streams must agree; each sentence is then
//! assigned the shortest EDU range holding at least 95% of its characters.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::rst::{DiscourseTree, NodeId};
use crate::text::Document;

/// Sentences need this share of their normalized characters inside the
/// assigned EDU range, expressed in percent.
pub const COVERAGE_PERCENT: usize = 95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DepthCategory {
    /// The EDU range is not a single node of the tree.
    Split,
    /// The sentence is one EDU.
    SingleEdu,
    /// The EDU range is exactly the span of a node with this height.
    Subtree(u32),
}

impl DepthCategory {
    /// -1 for split sentences, 0 for single EDUs, the subtree height otherwise.
    pub fn code(self) -> i64 {
        match self {
            DepthCategory::Split => -1,
            DepthCategory::SingleEdu => 0,
            DepthCategory::Subtree(h) => i64::from(h),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SentenceAlignment {
    pub sentence_index: usize,
    pub char_span: (usize, usize),
    /// `None` when the sentence could not be aligned.
    pub edu_range: Option<(usize, usize)>,
    pub covering_node: Option<NodeId>,
    pub category: Option<DepthCategory>,
    pub subtree_height: f64,
}

impl SentenceAlignment {
    pub fn is_aligned(&self) -> bool {
        self.edu_range.is_some()
    }
}

/// Normalized character counts of one sentence, grouped by EDU in ascending
/// EDU order. Characters outside every EDU count towards `total` only.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub(crate) struct SentenceProfile {
    pub total: usize,
    pub by_edu: Vec<(usize, usize)>,
}

fn normalized(c: char) -> impl Iterator<Item = char> {
    let keep = !(c.is_whitespace() || c.is_control());
    c.to_lowercase().filter(move |_| keep)
}

/// Builds the per-sentence character profile against `tree`, failing at the
/// first character where the two texts disagree.
pub(crate) fn char_profiles(doc: &Document, tree: &DiscourseTree) -> Result<Vec<SentenceProfile>> {
    // owner EDU of every tree character
    let mut tree_stream = Vec::new();
    let edus = tree.edus();
    let mut edu_i = 0;
    for (pos, c) in tree.text().chars().enumerate() {
        while edu_i < edus.len() && edus[edu_i].char_span.1 <= pos {
            edu_i += 1;
        }
        let owner = edus
            .get(edu_i)
            .filter(|e| e.char_span.0 <= pos && pos < e.char_span.1)
            .map(|e| e.index);
        tree_stream.extend(normalized(c).map(|n| (n, owner, pos)));
    }

    let sentences = doc.sentences();
    let mut profiles = vec![SentenceProfile::default(); sentences.len()];
    let mut sent_i = 0;
    let mut k = 0;
    for (pos, c) in doc.text().chars().enumerate() {
        while sent_i < sentences.len() && sentences[sent_i].char_span.1 <= pos {
            sent_i += 1;
        }
        for n in normalized(c) {
            let Some(&(t, owner, _)) = tree_stream.get(k) else {
                return Err(Error::Alignment {
                    offset: pos,
                    message: "document text continues past the end of the tree text".into(),
                });
            };
            if t != n {
                return Err(Error::Alignment {
                    offset: pos,
                    message: format!("document has {c:?} where the tree text has {t:?}"),
                });
            }
            k += 1;
            let Some(profile) = profiles.get_mut(sent_i) else { continue };
            profile.total += 1;
            if let Some(edu) = owner {
                match profile.by_edu.last_mut() {
                    Some((last, count)) if *last == edu => *count += 1,
                    _ => profile.by_edu.push((edu, 1)),
                }
            }
        }
    }
    if let Some(&(_, _, tree_pos)) = tree_stream.get(k) {
        return Err(Error::Alignment {
            offset: doc.text().chars().count(),
            message: format!("tree text continues past the end of the document (tree char {tree_pos})"),
        });
    }
    Ok(profiles)
}

/// Shortest EDU window holding at least [`COVERAGE_PERCENT`] of the
/// sentence's characters; the earliest on ties.
pub(crate) fn minimal_range(profile: &SentenceProfile) -> Option<(usize, usize)> {
    if profile.total == 0 {
        return None;
    }
    let covers = |sum: usize| sum * 100 >= COVERAGE_PERCENT * profile.total;
    let entries = &profile.by_edu;
    let mut best: Option<(usize, usize)> = None;
    let mut sum = 0;
    let mut i = 0;
    for j in 0..entries.len() {
        sum += entries[j].1;
        while i < j && covers(sum - entries[i].1) {
            sum -= entries[i].1;
            i += 1;
        }
        if covers(sum) {
            let cand = (entries[i].0, entries[j].0);
            if best.is_none_or(|b| cand.1 - cand.0 < b.1 - b.0) {
                best = Some(cand);
            }
        }
    }
    best
}

pub fn align_sentences(doc: &Document, tree: &DiscourseTree) -> Result<Vec<SentenceAlignment>> {
    if doc.is_empty() {
        return Err(Error::invalid("no sentences to align"));
    }
    let profiles = char_profiles(doc, tree)?;
    Ok(doc
        .sentences()
        .iter()
        .zip(&profiles)
        .map(|(sentence, profile)| {
            let edu_range = minimal_range(profile);
            if edu_range.is_none() {
                log::warn!(
                    "{}: sentence {} could not be aligned to EDUs",
                    tree.source_id(),
                    sentence.index
                );
            }
            let (covering_node, category, subtree_height) = match edu_range {
                None => (None, None, 0.0),
                Some((lo, hi)) => classify(tree, lo, hi),
            };
            SentenceAlignment {
                sentence_index: sentence.index,
                char_span: sentence.char_span,
                edu_range,
                covering_node,
                category,
                subtree_height,
            }
        })
        .collect())
}

fn classify(tree: &DiscourseTree, lo: usize, hi: usize) -> (Option<NodeId>, Option<DepthCategory>, f64) {
    if lo == hi {
        return (Some(tree.leaf(lo)), Some(DepthCategory::SingleEdu), 0.0);
    }
    match tree.node_with_span(lo, hi) {
        Some(id) => {
            let h = tree.node(id).height;
            (Some(id), Some(DepthCategory::Subtree(h)), f64::from(h))
        }
        None => (None, Some(DepthCategory::Split), ((hi - lo) as f64).sqrt()),
    }
}

/// Fractions of aligned sentences per depth category.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DepthHistogram {
    pub split: f64,
    pub single_edu: f64,
    pub subtree: f64,
    pub count: usize,
}

pub fn depth_category_histogram(alignments: &[SentenceAlignment]) -> Result<DepthHistogram> {
    let categories: Vec<DepthCategory> = alignments.iter().filter_map(|a| a.category).collect();
    histogram_of(&categories)
}

pub fn histogram_of(categories: &[DepthCategory]) -> Result<DepthHistogram> {
    if categories.is_empty() {
        return Err(Error::invalid("histogram needs at least one aligned sentence"));
    }
    let mut counts = [0usize; 3];
    for c in categories {
        counts[match c {
            DepthCategory::Split => 0,
            DepthCategory::SingleEdu => 1,
            DepthCategory::Subtree(_) => 2,
        }] += 1;
    }
    let n = categories.len() as f64;
    Ok(DepthHistogram {
        split: counts[0] as f64 / n,
        single_edu: counts[1] as f64 / n,
        subtree: counts[2] as f64 / n,
        count: categories.len(),
    })
}

/// One line of the alignment dump.
#[derive(Debug, Clone, Serialize)]
pub struct AlignmentRecord<'a> {
    pub pair_id: &'a str,
    pub sentence_index: usize,
    pub lo: Option<usize>,
    pub hi: Option<usize>,
    pub category: Option<i64>,
    pub height: f64,
}

impl<'a> AlignmentRecord<'a> {
    pub fn new(pair_id: &'a str, a: &SentenceAlignment) -> Self {
        AlignmentRecord {
            pair_id,
            sentence_index: a.sentence_index,
            lo: a.edu_range.map(|r| r.0),
            hi: a.edu_range.map(|r| r.1),
            category: a.category.map(DepthCategory::code),
            height: a.subtree_height,
        }
    }
}
