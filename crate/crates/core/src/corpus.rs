//! Dataset manifests: one JSON record per line pointing at the document,
//! summary and optional tree files of a pair. Paths are relative to the
//! manifest's directory.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{json_format_error, Error, Result};
use crate::rst::{parse_tree_file, DiscourseTree};
use crate::text::Document;

pub const DEFAULT_DATASET_TAG: &str = "default";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelKind {
    Binary,
    Continuous,
}

impl fmt::Display for LabelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LabelKind::Binary => "binary",
            LabelKind::Continuous => "continuous",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestRecord {
    pub pair_id: String,
    pub doc_ref: String,
    pub summary_ref: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doc_tree_ref: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary_tree_ref: Option<String>,
    pub label: f64,
    pub label_kind: LabelKind,
    /// Per summary sentence: 1 consistent, 0 inconsistent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sentence_labels: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset_tag: Option<String>,
    /// 1-based document sentence indices where a new article starts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub article_starts: Option<Vec<usize>>,
}

impl ManifestRecord {
    pub fn dataset_tag(&self) -> &str {
        self.dataset_tag.as_deref().unwrap_or(DEFAULT_DATASET_TAG)
    }
}

/// Parses and checks a manifest. Records come back sorted by `pair_id`.
pub fn parse_manifest(input: &str) -> Result<Vec<ManifestRecord>> {
    let mut records = Vec::new();
    let mut offset = 0;
    for line in input.split_inclusive('\n') {
        let body = line.trim();
        if !body.is_empty() {
            let rec: ManifestRecord = serde_json::from_str(line).map_err(|e| match json_format_error(line, &e) {
                Error::Format { offset: o, message } => Error::Format { offset: offset + o, message },
                other => other,
            })?;
            records.push(rec);
        }
        offset += line.len();
    }
    let mut seen = HashSet::new();
    let mut kinds: BTreeMap<String, LabelKind> = BTreeMap::new();
    for rec in &records {
        if !seen.insert(rec.pair_id.as_str()) {
            return Err(Error::Corpus(format!("duplicate pair_id {:?}", rec.pair_id)));
        }
        if !rec.label.is_finite() {
            return Err(Error::Corpus(format!("{}: label is not a finite number", rec.pair_id)));
        }
        if rec.label_kind == LabelKind::Binary && rec.label != 0.0 && rec.label != 1.0 {
            return Err(Error::Corpus(format!(
                "{}: label {} is not binary (0 or 1)",
                rec.pair_id, rec.label
            )));
        }
        if let Some(labels) = &rec.sentence_labels {
            if let Some(bad) = labels.iter().find(|&&l| l != 0.0 && l != 1.0) {
                return Err(Error::Corpus(format!("{}: sentence label {bad} is not 0 or 1", rec.pair_id)));
            }
        }
        let tag = rec.dataset_tag().to_string();
        match kinds.get(&tag) {
            Some(&k) if k != rec.label_kind => {
                return Err(Error::Corpus(format!(
                    "dataset {tag:?} mixes {k} and {} labels (pair {})",
                    rec.label_kind, rec.pair_id
                )));
            }
            _ => {
                kinds.insert(tag, rec.label_kind);
            }
        }
    }
    records.sort_by(|a, b| a.pair_id.cmp(&b.pair_id));
    Ok(records)
}

#[derive(Debug, Clone)]
pub struct CorpusRecord {
    pub pair_id: String,
    pub dataset_tag: String,
    pub label: f64,
    pub label_kind: LabelKind,
    pub sentence_labels: Option<Vec<f64>>,
    pub document: Document,
    pub summary: Document,
    pub doc_tree: Option<DiscourseTree>,
    pub summary_tree: Option<DiscourseTree>,
}

impl CorpusRecord {
    /// The document has no tree and will be segmented with sentence windows.
    pub fn doc_tree_absent(&self) -> bool {
        self.doc_tree.is_none()
    }

    pub fn summary_tree_absent(&self) -> bool {
        self.summary_tree.is_none()
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn load_tree(base: &Path, reference: Option<&str>) -> Result<Option<DiscourseTree>> {
    let Some(r) = reference else { return Ok(None) };
    let path = base.join(r);
    parse_tree_file(&read(&path)?).map_err(|e| match e {
        Error::Format { offset, message } => {
            Error::Format { offset, message: format!("{}: {message}", path.display()) }
        }
        other => other,
    })
}

/// Loads the files of one manifest record, resolving paths against `base`.
pub fn load_record(base: &Path, rec: &ManifestRecord) -> Result<CorpusRecord> {
    let mut document = Document::from_lines(read(&base.join(&rec.doc_ref))?)?;
    if let Some(starts) = &rec.article_starts {
        document = document.with_article_starts(starts.clone())?;
    }
    let summary = Document::from_lines(read(&base.join(&rec.summary_ref))?)?;
    if let Some(labels) = &rec.sentence_labels {
        if labels.len() != summary.len() {
            return Err(Error::Corpus(format!(
                "{}: {} sentence labels for {} summary sentences",
                rec.pair_id,
                labels.len(),
                summary.len()
            )));
        }
    }
    Ok(CorpusRecord {
        pair_id: rec.pair_id.clone(),
        dataset_tag: rec.dataset_tag().to_string(),
        label: rec.label,
        label_kind: rec.label_kind,
        sentence_labels: rec.sentence_labels.clone(),
        document,
        summary,
        doc_tree: load_tree(base, rec.doc_tree_ref.as_deref())?,
        summary_tree: load_tree(base, rec.summary_tree_ref.as_deref())?,
    })
}

/// Directory against which a manifest's relative paths resolve.
pub fn manifest_base(manifest: &Path) -> PathBuf {
    manifest.parent().map(Path::to_path_buf).unwrap_or_default()
}

pub fn read_manifest(manifest: &Path) -> Result<Vec<ManifestRecord>> {
    parse_manifest(&read(manifest)?)
}

/// Reads a manifest and loads every record, failing on the first error.
pub fn ingest_corpus(manifest: &Path) -> Result<Vec<CorpusRecord>> {
    let base = manifest_base(manifest);
    read_manifest(manifest)?
        .iter()
        .map(|rec| {
            load_record(&base, rec).map_err(|e| match e {
                Error::Corpus(m) => Error::Corpus(m),
                other => Error::Corpus(format!("{}: {other}", rec.pair_id)),
            })
        })
        .collect()
}
