//! Sentence-segmented source texts.
//!
//! Sentence boundaries are an input to this crate. The line format used by
//! the corpus loader has one sentence per line; a blank line starts a new
//! paragraph.

use crate::error::{Error, Result};
use crate::rst::char_byte_offsets;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    /// 1-based position in the document.
    pub index: usize,
    pub text: String,
    /// Half-open character span into the document text.
    pub char_span: (usize, usize),
    pub word_count: usize,
    /// True when a paragraph break precedes this sentence.
    pub paragraph_start: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    text: String,
    sentences: Vec<Sentence>,
    article_starts: Vec<usize>,
}

pub fn word_count(s: &str) -> usize {
    s.split_whitespace().count()
}

impl Document {
    /// One sentence per non-blank line. Leading and trailing whitespace of a
    /// line is not part of the sentence.
    pub fn from_lines(text: impl Into<String>) -> Result<Self> {
        let text = text.into();
        let mut spans = Vec::new();
        let mut paragraph_starts = Vec::new();
        let mut pending_break = true;
        let mut pos = 0;
        for line in text.split_inclusive('\n') {
            let len = line.chars().count();
            let lead = line.chars().take_while(|c| c.is_whitespace()).count();
            let content = line.trim();
            if content.is_empty() {
                pending_break = true;
            } else {
                let start = pos + lead;
                spans.push((start, start + content.chars().count()));
                paragraph_starts.push(pending_break);
                pending_break = false;
            }
            pos += len;
        }
        Document::from_spans(text, &spans, &paragraph_starts)
    }

    /// Joins sentences with single spaces; no paragraph structure.
    pub fn from_sentences<S: AsRef<str>>(sentences: &[S]) -> Result<Self> {
        let mut text = String::new();
        let mut spans = Vec::with_capacity(sentences.len());
        let mut pos = 0;
        for (i, s) in sentences.iter().enumerate() {
            if i > 0 {
                text.push(' ');
                pos += 1;
            }
            let s = s.as_ref();
            let len = s.chars().count();
            text.push_str(s);
            spans.push((pos, pos + len));
            pos += len;
        }
        let mut flags = vec![false; spans.len()];
        if let Some(first) = flags.first_mut() {
            *first = true;
        }
        Document::from_spans(text, &spans, &flags)
    }

    /// Builds a document from explicit sentence spans. Spans must be non-empty,
    /// ordered, and separated only by whitespace.
    pub fn from_spans(
        text: impl Into<String>,
        spans: &[(usize, usize)],
        paragraph_starts: &[bool],
    ) -> Result<Self> {
        let text = text.into();
        if spans.is_empty() {
            return Err(Error::invalid("document has no sentences"));
        }
        if paragraph_starts.len() != spans.len() {
            return Err(Error::invalid("paragraph flags must match the sentence count"));
        }
        let byte_at = char_byte_offsets(&text);
        let n_chars = byte_at.len() - 1;
        let mut sentences = Vec::with_capacity(spans.len());
        let mut prev_end = 0;
        for (i, &(start, end)) in spans.iter().enumerate() {
            if start >= end || end > n_chars {
                return Err(Error::invalid(format!("sentence {} has an invalid span", i + 1)));
            }
            if start < prev_end {
                return Err(Error::invalid(format!("sentence {} overlaps its predecessor", i + 1)));
            }
            let gap = &text[byte_at[prev_end]..byte_at[start]];
            if !gap.chars().all(char::is_whitespace) {
                return Err(Error::invalid(format!(
                    "non-whitespace text before sentence {}",
                    i + 1
                )));
            }
            let s = text[byte_at[start]..byte_at[end]].to_string();
            sentences.push(Sentence {
                index: i + 1,
                word_count: word_count(&s),
                text: s,
                char_span: (start, end),
                paragraph_start: paragraph_starts[i],
            });
            prev_end = end;
        }
        Ok(Document { text, sentences, article_starts: Vec::new() })
    }

    /// Marks the 1-based sentence indices where a new article begins.
    pub fn with_article_starts(mut self, mut starts: Vec<usize>) -> Result<Self> {
        starts.sort_unstable();
        starts.dedup();
        if let Some(&bad) = starts.iter().find(|&&s| s == 0 || s > self.sentences.len()) {
            return Err(Error::invalid(format!("article start {bad} is not a sentence index")));
        }
        self.article_starts = starts;
        Ok(self)
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn sentences(&self) -> &[Sentence] {
        &self.sentences
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn article_starts(&self) -> &[usize] {
        &self.article_starts
    }

    /// True when sentence `index` must open a new segment in window chunking.
    pub fn forces_break_before(&self, index: usize) -> bool {
        index > 1
            && (self.sentences[index - 1].paragraph_start
                || self.article_starts.binary_search(&index).is_ok())
    }

    pub fn is_article_start(&self, index: usize) -> bool {
        index > 1 && self.article_starts.binary_search(&index).is_ok()
    }
}
