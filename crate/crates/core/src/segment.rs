//! Source document segmentation.
//!
//! With a tree, the frontier at level `N` (nodes at exactly level `N` plus
//! leaves above it) defines EDU spans; every sentence goes to the span that
//! holds most of its characters, ties to the earlier span. Segments over the
//! word capacity are re-chunked with the sentence window used for documents
//! without a tree.

use std::fmt;

use serde::{Serialize, Serializer};

use crate::align::char_profiles;
use crate::error::{Error, Result};
use crate::rst::DiscourseTree;
use crate::text::Document;

pub const DEFAULT_CAPACITY: usize = 350;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    TreeLevel(u32),
    FallbackWindow,
    Rechunked,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::TreeLevel(n) => write!(f, "tree_level{n}"),
            Provenance::FallbackWindow => f.write_str("fallback_window"),
            Provenance::Rechunked => f.write_str("rechunked"),
        }
    }
}

impl Serialize for Provenance {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    /// 1-based.
    pub segment_index: usize,
    pub first_sentence: usize,
    pub last_sentence: usize,
    /// Sentence texts joined by single spaces.
    pub text: String,
    pub word_count: usize,
    pub provenance: Provenance,
    /// A single sentence longer than the capacity.
    pub oversized: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentPlan {
    pub segments: Vec<Segment>,
    pub provenance: Provenance,
}

impl SegmentPlan {
    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn sentence_ranges(&self) -> Vec<(usize, usize)> {
        self.segments.iter().map(|s| (s.first_sentence, s.last_sentence)).collect()
    }
}

/// EDU spans of the tree frontier at `level`, in document order.
pub fn frontier_spans(tree: &DiscourseTree, level: u32) -> Result<Vec<(usize, usize)>> {
    if level < 1 {
        return Err(Error::invalid("segmentation level must be at least 1"));
    }
    let nodes = tree.nodes();
    let mut spans = Vec::new();
    let mut stack = vec![0];
    while let Some(id) = stack.pop() {
        let node = &nodes[id];
        if node.level == level || node.is_leaf() {
            spans.push(node.span());
        } else {
            stack.extend(node.children.iter().rev());
        }
    }
    Ok(spans)
}

fn check_capacity(capacity: usize) -> Result<()> {
    if capacity == 0 {
        return Err(Error::invalid("capacity must be at least one word"));
    }
    Ok(())
}

/// Greedy whole-sentence windows over sentences `first..=last`.
fn windows(doc: &Document, first: usize, last: usize, capacity: usize) -> Vec<(usize, usize)> {
    let sentences = doc.sentences();
    let mut out = Vec::new();
    let mut start = first;
    let mut words = 0;
    for i in first..=last {
        let wc = sentences[i - 1].word_count;
        if i > start && (words + wc > capacity || doc.forces_break_before(i)) {
            out.push((start, i - 1));
            start = i;
            words = 0;
        }
        words += wc;
    }
    out.push((start, last));
    out
}

fn make_segment(doc: &Document, index: usize, range: (usize, usize), provenance: Provenance, capacity: usize) -> Segment {
    let sentences = &doc.sentences()[range.0 - 1..range.1];
    let word_count = sentences.iter().map(|s| s.word_count).sum();
    let text = sentences.iter().map(|s| s.text.as_str()).collect::<Vec<_>>().join(" ");
    Segment {
        segment_index: index,
        first_sentence: range.0,
        last_sentence: range.1,
        text,
        word_count,
        provenance,
        oversized: range.0 == range.1 && word_count > capacity,
    }
}

/// Sentence-window chunking. Paragraph breaks and article starts always open
/// a new window.
pub fn fallback_chunk(doc: &Document, capacity: usize) -> Result<SegmentPlan> {
    check_capacity(capacity)?;
    if doc.is_empty() {
        return Err(Error::invalid("document has no sentences"));
    }
    let segments = windows(doc, 1, doc.len(), capacity)
        .into_iter()
        .enumerate()
        .map(|(i, r)| make_segment(doc, i + 1, r, Provenance::FallbackWindow, capacity))
        .collect();
    Ok(SegmentPlan { segments, provenance: Provenance::FallbackWindow })
}

/// Index into the sorted, tiling `spans` of the span holding `edu`.
fn span_of(spans: &[(usize, usize)], edu: usize) -> usize {
    spans.partition_point(|s| s.1 < edu)
}

/// Sentence ranges from snapping the level-`N` frontier to sentences, before
/// any capacity handling or article splitting.
pub fn snapped_ranges(tree: &DiscourseTree, doc: &Document, level: u32) -> Result<Vec<(usize, usize)>> {
    let spans = frontier_spans(tree, level)?;
    let profiles = char_profiles(doc, tree)?;
    let mut owner = Vec::with_capacity(profiles.len());
    let mut prev = 0;
    for p in &profiles {
        let mut best: Option<(usize, usize)> = None;
        let mut acc: Vec<(usize, usize)> = Vec::new();
        for &(edu, count) in &p.by_edu {
            let s = span_of(&spans, edu);
            match acc.last_mut() {
                Some((last, c)) if *last == s => *c += count,
                _ => acc.push((s, count)),
            }
        }
        for (s, c) in acc {
            if best.is_none_or(|(_, bc)| c > bc) {
                best = Some((s, c));
            }
        }
        let s = best.map_or(prev, |b| b.0);
        if s < prev {
            return Err(Error::Invariant(format!("sentence {} snapped backwards", owner.len() + 1)));
        }
        owner.push(s);
        prev = s;
    }
    let mut ranges = Vec::new();
    let mut start = 1;
    for i in 2..=owner.len() {
        if owner[i - 1] != owner[i - 2] {
            ranges.push((start, i - 1));
            start = i;
        }
    }
    ranges.push((start, owner.len()));
    Ok(ranges)
}

pub fn segment_by_level(
    tree: &DiscourseTree,
    doc: &Document,
    level: u32,
    capacity: usize,
) -> Result<SegmentPlan> {
    check_capacity(capacity)?;
    if doc.is_empty() {
        return Err(Error::invalid("document has no sentences"));
    }
    let mut ranges = Vec::new();
    for (first, last) in snapped_ranges(tree, doc, level)? {
        let mut start = first;
        for i in first + 1..=last {
            if doc.is_article_start(i) {
                ranges.push((start, i - 1));
                start = i;
            }
        }
        ranges.push((start, last));
    }

    let sentences = doc.sentences();
    let mut segments = Vec::new();
    let mut rechunked = false;
    for (first, last) in ranges {
        let words: usize = sentences[first - 1..last].iter().map(|s| s.word_count).sum();
        if words > capacity && last > first {
            rechunked = true;
            for r in windows(doc, first, last, capacity) {
                segments.push(make_segment(doc, segments.len() + 1, r, Provenance::Rechunked, capacity));
            }
        } else {
            segments.push(make_segment(doc, segments.len() + 1, (first, last), Provenance::TreeLevel(level), capacity));
        }
    }
    let provenance = if rechunked { Provenance::Rechunked } else { Provenance::TreeLevel(level) };
    Ok(SegmentPlan { segments, provenance })
}

/// Tree segmentation when both a tree and a level are given, otherwise
/// sentence windows.
pub fn plan_document(
    doc: &Document,
    tree: Option<&DiscourseTree>,
    level: Option<u32>,
    capacity: usize,
) -> Result<SegmentPlan> {
    match (tree, level) {
        (Some(tree), Some(level)) => segment_by_level(tree, doc, level, capacity),
        _ => fallback_chunk(doc, capacity),
    }
}

/// One line of the plan dump.
#[derive(Debug, Clone, Serialize)]
pub struct PlanRecord<'a> {
    pub doc_id: &'a str,
    pub segment_index: usize,
    pub first_sentence: usize,
    pub last_sentence: usize,
    pub word_count: usize,
    pub provenance: Provenance,
    pub oversized: bool,
}

pub fn plan_records<'a>(doc_id: &'a str, plan: &SegmentPlan) -> Vec<PlanRecord<'a>> {
    plan.segments
        .iter()
        .map(|s| PlanRecord {
            doc_id,
            segment_index: s.segment_index,
            first_sentence: s.first_sentence,
            last_sentence: s.last_sentence,
            word_count: s.word_count,
            provenance: s.provenance,
            oversized: s.oversized,
        })
        .collect()
}
