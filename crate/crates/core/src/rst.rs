//! RST discourse trees: the canonical in-memory model, its JSON document
//! form, and structural validation.
//!
//! A tree document looks like this:
//!
//! ```json
//! {"source_id": "doc-1",
//!  "text": "Mr. Watkins said volume is down",
//!  "edus": [{"index": 1, "char_start": 0, "char_end": 16},
//!           {"index": 2, "char_start": 17, "char_end": 31}],
//!  "root": {"lo": 1, "hi": 2, "nuclearity": "ROOT", "relation": "",
//!           "children": [
//!             {"lo": 1, "hi": 1, "nuclearity": "S", "relation": "Attribution", "children": []},
//!             {"lo": 2, "hi": 2, "nuclearity": "N", "relation": "span", "children": []}]}}
//! ```
//!
//! EDU indices are 1-based. Character offsets count Unicode scalar values and
//! are half-open.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{json_format_error, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Nuclearity {
    #[serde(rename = "N")]
    Nucleus,
    #[serde(rename = "S")]
    Satellite,
    #[serde(rename = "ROOT")]
    Root,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edu {
    pub index: usize,
    pub text: String,
    pub char_span: (usize, usize),
}

/// A node of the recursive tree. Leaves have `lo == hi` and no children.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeNode {
    pub lo: usize,
    pub hi: usize,
    pub nuclearity: Nuclearity,
    #[serde(default)]
    pub relation: String,
    #[serde(default)]
    pub children: Vec<TreeNode>,
}

impl TreeNode {
    pub fn leaf(index: usize, nuclearity: Nuclearity, relation: impl Into<String>) -> Self {
        TreeNode { lo: index, hi: index, nuclearity, relation: relation.into(), children: Vec::new() }
    }

    /// Builds an internal node whose span is taken from its first and last child.
    pub fn internal(
        nuclearity: Nuclearity,
        relation: impl Into<String>,
        children: Vec<TreeNode>,
    ) -> Self {
        let lo = children.first().map_or(0, |c| c.lo);
        let hi = children.last().map_or(0, |c| c.hi);
        TreeNode { lo, hi, nuclearity, relation: relation.into(), children }
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn span(&self) -> (usize, usize) {
        (self.lo, self.hi)
    }
}

pub type NodeId = usize;

/// Flattened view of one tree node. Node ids follow preorder, so the root is 0.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeInfo {
    pub lo: usize,
    pub hi: usize,
    pub nuclearity: Nuclearity,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    /// Edge distance from the root.
    pub level: u32,
    /// Edge distance to the deepest descendant leaf.
    pub height: u32,
}

impl NodeInfo {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn span(&self) -> (usize, usize) {
        (self.lo, self.hi)
    }
}

/// A validated, immutable discourse tree.
#[derive(Debug, Clone)]
pub struct DiscourseTree {
    source_id: String,
    text: String,
    edus: Vec<Edu>,
    root: TreeNode,
    nodes: Vec<NodeInfo>,
    leaves: Vec<NodeId>,
    by_span: HashMap<(usize, usize), NodeId>,
}

impl PartialEq for DiscourseTree {
    fn eq(&self, other: &Self) -> bool {
        self.source_id == other.source_id
            && self.text == other.text
            && self.edus == other.edus
            && self.root == other.root
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct EduRecord {
    index: usize,
    char_start: usize,
    char_end: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TreeDocument {
    source_id: String,
    text: String,
    edus: Vec<EduRecord>,
    root: TreeNode,
}

#[derive(Debug, Deserialize)]
struct AbsentMarker {
    #[allow(dead_code)]
    #[serde(default)]
    source_id: String,
    tree_absent: bool,
}

impl DiscourseTree {
    /// Validates and builds a tree from EDU character spans over `text`.
    pub fn new(
        source_id: impl Into<String>,
        text: impl Into<String>,
        edu_spans: &[(usize, usize)],
        root: TreeNode,
    ) -> Result<Self> {
        let text = text.into();
        let byte_at = char_byte_offsets(&text);
        let n_chars = byte_at.len() - 1;
        let mut edus = Vec::with_capacity(edu_spans.len());
        let mut prev_end = 0;
        for (i, &(start, end)) in edu_spans.iter().enumerate() {
            let index = i + 1;
            let bad = |message: String| Error::Validation { span: (index, index), message };
            if start > end {
                return Err(bad(format!("EDU {index} has char_start {start} > char_end {end}")));
            }
            if end > n_chars {
                return Err(bad(format!(
                    "EDU {index} ends at char {end} past the text length {n_chars}"
                )));
            }
            if start < prev_end {
                return Err(bad(format!(
                    "EDU {index} starts at char {start} before the previous EDU ends ({prev_end})"
                )));
            }
            prev_end = end;
            edus.push(Edu {
                index,
                text: text[byte_at[start]..byte_at[end]].to_string(),
                char_span: (start, end),
            });
        }
        if edus.is_empty() {
            return Err(Error::Validation { span: (0, 0), message: "tree has no EDUs".into() });
        }
        let e = edus.len();
        if root.span() != (1, e) {
            return Err(Error::Validation {
                span: root.span(),
                message: format!("root must span [1, {e}]"),
            });
        }
        if root.nuclearity != Nuclearity::Root {
            return Err(Error::Validation {
                span: root.span(),
                message: "root must carry nuclearity ROOT".into(),
            });
        }
        validate_node(&root, true)?;

        let mut nodes = Vec::new();
        flatten(&root, None, 0, &mut nodes);
        let mut leaves = vec![usize::MAX; e];
        let mut by_span = HashMap::with_capacity(nodes.len());
        for (id, node) in nodes.iter().enumerate() {
            if node.is_leaf() {
                leaves[node.lo - 1] = id;
            }
            by_span.insert(node.span(), id);
        }
        Ok(DiscourseTree { source_id: source_id.into(), text, edus, root, nodes, leaves, by_span })
    }

    /// Builds a tree whose text is the EDU texts joined by single spaces.
    pub fn from_edu_texts(
        source_id: impl Into<String>,
        edu_texts: &[&str],
        root: TreeNode,
    ) -> Result<Self> {
        let mut text = String::new();
        let mut spans = Vec::with_capacity(edu_texts.len());
        let mut pos = 0;
        for (i, t) in edu_texts.iter().enumerate() {
            if i > 0 {
                text.push(' ');
                pos += 1;
            }
            let len = t.chars().count();
            text.push_str(t);
            spans.push((pos, pos + len));
            pos += len;
        }
        DiscourseTree::new(source_id, text, &spans, root)
    }

    /// Parses and validates a canonical tree document.
    pub fn from_json(input: &str) -> Result<Self> {
        let doc: TreeDocument = parse_json(input)?;
        let spans = edu_spans_from_records(&doc.edus)?;
        DiscourseTree::new(doc.source_id, doc.text, &spans, doc.root)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_document()).expect("tree documents always serialize")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("tree documents always serialize")
    }

    fn to_document(&self) -> TreeDocument {
        TreeDocument {
            source_id: self.source_id.clone(),
            text: self.text.clone(),
            edus: self
                .edus
                .iter()
                .map(|e| EduRecord { index: e.index, char_start: e.char_span.0, char_end: e.char_span.1 })
                .collect(),
            root: self.root.clone(),
        }
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn edus(&self) -> &[Edu] {
        &self.edus
    }

    pub fn edu_count(&self) -> usize {
        self.edus.len()
    }

    pub fn root(&self) -> &TreeNode {
        &self.root
    }

    /// All nodes in preorder; index 0 is the root.
    pub fn nodes(&self) -> &[NodeInfo] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &NodeInfo {
        &self.nodes[id]
    }

    /// Node id of the leaf holding EDU `index` (1-based).
    pub fn leaf(&self, index: usize) -> NodeId {
        self.leaves[index - 1]
    }

    /// The node whose span is exactly `[lo, hi]`, if any.
    pub fn node_with_span(&self, lo: usize, hi: usize) -> Option<NodeId> {
        self.by_span.get(&(lo, hi)).copied()
    }

    /// Tree depth `D`: one more than the deepest leaf level (root is level 0).
    pub fn depth(&self) -> u32 {
        self.nodes[0].height + 1
    }
}

/// Parses a tree file that may also hold a `{"tree_absent": true}` marker.
/// Returns `Ok(None)` for the marker.
pub fn parse_tree_file(input: &str) -> Result<Option<DiscourseTree>> {
    if let Ok(marker) = serde_json::from_str::<AbsentMarker>(input) {
        if marker.tree_absent {
            return Ok(None);
        }
    }
    DiscourseTree::from_json(input).map(Some)
}

fn parse_json<T: serde::de::DeserializeOwned>(input: &str) -> Result<T> {
    let mut de = serde_json::Deserializer::from_str(input);
    de.disable_recursion_limit();
    let value = T::deserialize(&mut de).map_err(|e| json_format_error(input, &e))?;
    de.end().map_err(|e| json_format_error(input, &e))?;
    Ok(value)
}

fn edu_spans_from_records(records: &[EduRecord]) -> Result<Vec<(usize, usize)>> {
    records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            if r.index != i + 1 {
                Err(Error::Validation {
                    span: (r.index, r.index),
                    message: format!("EDU indices must run 1..E in order; found {} at position {}", r.index, i + 1),
                })
            } else {
                Ok((r.char_start, r.char_end))
            }
        })
        .collect()
}

fn validate_node(node: &TreeNode, is_root: bool) -> Result<()> {
    let bad = |message: String| Err(Error::Validation { span: node.span(), message });
    if node.lo > node.hi || node.lo == 0 {
        return bad("span is empty or not 1-based".into());
    }
    if !is_root && node.nuclearity == Nuclearity::Root {
        return bad("only the root may carry nuclearity ROOT".into());
    }
    if node.children.is_empty() {
        if node.lo != node.hi {
            return bad("leaf must cover exactly one EDU".into());
        }
        return Ok(());
    }
    if node.lo == node.hi {
        return bad("single-EDU node must be a leaf".into());
    }
    if node.children.len() < 2 {
        return bad("internal node needs at least two children".into());
    }
    if !node.children.iter().any(|c| c.nuclearity == Nuclearity::Nucleus) {
        return bad("internal node has no nucleus child".into());
    }
    let mut expected = node.lo;
    for child in &node.children {
        if child.lo > expected {
            return bad(format!(
                "children leave a gap at EDU {expected}..{} (child [{}, {}])",
                child.lo - 1,
                child.lo,
                child.hi
            ));
        }
        if child.lo < expected {
            return bad(format!("child [{}, {}] overlaps its left sibling", child.lo, child.hi));
        }
        expected = child.hi + 1;
    }
    if expected != node.hi + 1 {
        return bad(format!("children end at EDU {} instead of {}", expected - 1, node.hi));
    }
    for child in &node.children {
        validate_node(child, false)?;
    }
    Ok(())
}

fn flatten(node: &TreeNode, parent: Option<NodeId>, level: u32, out: &mut Vec<NodeInfo>) -> u32 {
    let id = out.len();
    out.push(NodeInfo {
        lo: node.lo,
        hi: node.hi,
        nuclearity: node.nuclearity,
        parent,
        children: Vec::with_capacity(node.children.len()),
        level,
        height: 0,
    });
    let mut height = 0;
    for child in &node.children {
        let child_id = out.len();
        out[id].children.push(child_id);
        height = height.max(1 + flatten(child, Some(id), level + 1, out));
    }
    out[id].height = height;
    height
}

/// Byte offset of every char boundary, including the end of the string.
pub(crate) fn char_byte_offsets(text: &str) -> Vec<usize> {
    let mut offsets: Vec<usize> = text.char_indices().map(|(b, _)| b).collect();
    offsets.push(text.len());
    offsets
}
