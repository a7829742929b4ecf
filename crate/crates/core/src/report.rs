//! Score report files: one JSON object per line, header first.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::aggregate::{SentenceScore, Strategy};
use crate::error::{json_format_error, Error, Result};

pub const SCORES_FILE: &str = "scores.jsonl";
pub const FAILURES_FILE: &str = "failures.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportHeader {
    pub config_hash: String,
    pub seed: u64,
    pub scorer_id: String,
    pub strategy: Strategy,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SentenceLine {
    pub pair_id: String,
    pub sentence_index: usize,
    pub raw: f64,
    pub x: f64,
    pub height: f64,
    pub reweighted: f64,
}

impl SentenceLine {
    pub fn new(pair_id: &str, s: &SentenceScore) -> Self {
        SentenceLine {
            pair_id: pair_id.to_string(),
            sentence_index: s.sentence_index,
            raw: s.raw,
            x: s.depth_norm,
            height: s.height,
            reweighted: s.reweighted,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummaryLine {
    pub pair_id: String,
    pub summary_score: f64,
    pub strategy: Strategy,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ReportLine {
    Header(ReportHeader),
    Sentence(SentenceLine),
    Summary(SummaryLine),
}

/// Scores for one pair, as written to the report.
#[derive(Debug, Clone, PartialEq)]
pub struct PairScores {
    pub pair_id: String,
    pub sentences: Vec<SentenceLine>,
    pub summary: SummaryLine,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    pub header: ReportHeader,
    pub pairs: Vec<PairScores>,
}

/// A pair that could not be scored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub pair_id: String,
    pub exit_code: u8,
    pub error: String,
}

fn line_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("report line serializes")
}

impl ScoreReport {
    pub fn parse(input: &str) -> Result<Self> {
        let mut offset = 0;
        let mut header = None;
        let mut pairs: Vec<PairScores> = Vec::new();
        let mut pending: Vec<SentenceLine> = Vec::new();
        for raw in input.split_inclusive('\n') {
            let start = offset;
            offset += raw.len();
            let line = raw.trim_end_matches(['\n', '\r']);
            if line.trim().is_empty() {
                continue;
            }
            let parsed: ReportLine = serde_json::from_str(line).map_err(|e| match json_format_error(line, &e) {
                Error::Format { offset, message } => Error::Format { offset: start + offset, message },
                other => other,
            })?;
            let bad = |message: String| Error::Format { offset: start, message };
            match parsed {
                ReportLine::Header(h) if header.is_none() && pairs.is_empty() && pending.is_empty() => header = Some(h),
                ReportLine::Header(_) => return Err(bad("header must be the first line and appear once".into())),
                _ if header.is_none() => return Err(bad("report does not start with a header".into())),
                ReportLine::Sentence(s) => {
                    if pending.first().is_some_and(|p| p.pair_id != s.pair_id) {
                        return Err(bad(format!("sentence line for {} interleaves another pair", s.pair_id)));
                    }
                    pending.push(s);
                }
                ReportLine::Summary(summary) => {
                    if pending.iter().any(|p| p.pair_id != summary.pair_id) {
                        return Err(bad(format!("summary line for {} follows another pair's sentences", summary.pair_id)));
                    }
                    if pairs.iter().any(|p| p.pair_id == summary.pair_id) {
                        return Err(bad(format!("pair {} appears twice", summary.pair_id)));
                    }
                    pairs.push(PairScores {
                        pair_id: summary.pair_id.clone(),
                        sentences: std::mem::take(&mut pending),
                        summary,
                    });
                }
            }
        }
        if !pending.is_empty() {
            return Err(Error::Format { offset, message: "sentence lines without a summary line".into() });
        }
        let header = header.ok_or_else(|| Error::Format { offset: 0, message: "empty report".into() })?;
        Ok(ScoreReport { header, pairs })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Format { offset, message } => Error::Format { offset, message: format!("{}: {message}", path.display()) },
            other => other,
        })
    }

    pub fn write_to(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "{}", line_json(&self.header))?;
        for pair in &self.pairs {
            write_pair(&mut out, pair)?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("JSON is UTF-8")
    }

    pub fn summary_scores(&self) -> BTreeMap<&str, f64> {
        self.pairs.iter().map(|p| (p.pair_id.as_str(), p.summary.summary_score)).collect()
    }
}

pub fn write_pair(mut out: impl Write, pair: &PairScores) -> std::io::Result<()> {
    for s in &pair.sentences {
        writeln!(out, "{}", line_json(s))?;
    }
    writeln!(out, "{}", line_json(&pair.summary))
}

pub fn write_failures(path: &Path, failures: &[FailureRecord]) -> Result<()> {
    let mut text = String::new();
    for f in failures {
        text.push_str(&line_json(f));
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
