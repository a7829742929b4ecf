//! Premise/hypothesis alignment scoring.
//!
//! A [`Scorer`] wraps one [`Backend`] and an optional persistent
//! [`ScoreCache`]. Backends are the built-in lexical scorer, an external
//! process speaking newline-delimited JSON, or an HTTP endpoint.

mod builtin;
mod cache;
mod http;
mod subprocess;

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use builtin::{builtin_overlap, overlap_precision_recall, BuiltinOverlap};
pub use cache::{cache_key, CacheRecord, ScoreCache};
pub use http::HttpBackend;
pub use subprocess::SubprocessBackend;

pub const DEFAULT_MAX_IN_FLIGHT: usize = 8;
pub const DEFAULT_RETRIES: u32 = 2;
pub const DEFAULT_TIMEOUT_SECS: u64 = 120;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub id: u64,
    pub premise: String,
    pub hypothesis: String,
}

impl ScoreRequest {
    pub fn new(id: u64, premise: impl Into<String>, hypothesis: impl Into<String>) -> Self {
        ScoreRequest { id, premise: premise.into(), hypothesis: hypothesis.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScorerKind {
    BuiltinOverlap,
    Subprocess,
    Http,
}

impl fmt::Display for ScorerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScorerKind::BuiltinOverlap => "builtin_overlap",
            ScorerKind::Subprocess => "subprocess",
            ScorerKind::Http => "http",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "RawSpec")]
pub struct ScorerSpec {
    pub kind: ScorerKind,
    /// Command line for `subprocess`, base URL for `http`, empty for the builtin.
    pub locator: String,
    /// Cache identity. Must change whenever the model behind the backend does.
    pub scorer_id: String,
    pub max_in_flight: usize,
    pub timeout_secs: u64,
    pub retries: u32,
}

impl Default for ScorerSpec {
    fn default() -> Self {
        ScorerSpec::builtin()
    }
}

/// Config form of [`ScorerSpec`]; a missing `scorer_id` is derived from kind and locator.
#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawSpec {
    kind: ScorerKind,
    locator: String,
    scorer_id: Option<String>,
    max_in_flight: usize,
    timeout_secs: u64,
    retries: u32,
}

impl Default for RawSpec {
    fn default() -> Self {
        let b = ScorerSpec::builtin();
        RawSpec {
            kind: b.kind,
            locator: b.locator,
            scorer_id: None,
            max_in_flight: b.max_in_flight,
            timeout_secs: b.timeout_secs,
            retries: b.retries,
        }
    }
}

impl From<RawSpec> for ScorerSpec {
    fn from(raw: RawSpec) -> Self {
        let base = match raw.kind {
            ScorerKind::BuiltinOverlap => ScorerSpec::builtin(),
            ScorerKind::Subprocess => ScorerSpec::subprocess(raw.locator),
            ScorerKind::Http => ScorerSpec::http(raw.locator),
        };
        ScorerSpec {
            scorer_id: raw.scorer_id.unwrap_or(base.scorer_id),
            max_in_flight: raw.max_in_flight,
            timeout_secs: raw.timeout_secs,
            retries: raw.retries,
            ..base
        }
    }
}

impl ScorerSpec {
    pub fn builtin() -> Self {
        ScorerSpec {
            kind: ScorerKind::BuiltinOverlap,
            locator: String::new(),
            scorer_id: "builtin_overlap".into(),
            max_in_flight: DEFAULT_MAX_IN_FLIGHT,
            timeout_secs: DEFAULT_TIMEOUT_SECS,
            retries: DEFAULT_RETRIES,
        }
    }

    pub fn subprocess(command: impl Into<String>) -> Self {
        let locator = command.into();
        ScorerSpec { kind: ScorerKind::Subprocess, scorer_id: format!("subprocess:{locator}"), locator, ..Self::builtin() }
    }

    pub fn http(url: impl Into<String>) -> Self {
        let locator = url.into();
        ScorerSpec { kind: ScorerKind::Http, scorer_id: format!("http:{locator}"), locator, ..Self::builtin() }
    }

    /// Parses `builtin`, `subprocess:<command line>` or `http:<url>`.
    pub fn parse(s: &str) -> Result<Self> {
        if s == "builtin" || s == "builtin_overlap" {
            Ok(Self::builtin())
        } else if let Some(cmd) = s.strip_prefix("subprocess:") {
            Ok(Self::subprocess(cmd))
        } else if let Some(url) = s.strip_prefix("http:") {
            // accept both http:<url> and a bare http://host
            let url = if url.starts_with("//") { format!("http:{url}") } else { url.to_string() };
            Ok(Self::http(url))
        } else {
            Err(Error::invalid(format!("unknown scorer {s:?}; expected builtin, subprocess:<cmd> or http:<url>")))
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_in_flight == 0 {
            return Err(Error::invalid("max_in_flight must be positive"));
        }
        if self.scorer_id.is_empty() {
            return Err(Error::invalid("scorer_id must not be empty"));
        }
        if self.kind != ScorerKind::BuiltinOverlap && self.locator.trim().is_empty() {
            return Err(Error::invalid(format!("{} scorer needs a locator", self.kind)));
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs(self.timeout_secs.max(1))
    }
}

/// Scores a batch of requests. Implementations return exactly one score per
/// request, in request order.
pub trait Backend: Send + Sync {
    fn score(&self, requests: &[ScoreRequest]) -> Result<Vec<f64>>;
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn score(&self, requests: &[ScoreRequest]) -> Result<Vec<f64>> {
        (**self).score(requests)
    }
}

pub struct Scorer {
    spec: ScorerSpec,
    backend: Box<dyn Backend>,
    cache: Option<ScoreCache>,
    dispatched: AtomicU64,
}

impl fmt::Debug for Scorer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Scorer").field("spec", &self.spec).field("cached", &self.cache.is_some()).finish()
    }
}

impl Scorer {
    pub fn new(spec: ScorerSpec) -> Result<Self> {
        spec.validate()?;
        let backend: Box<dyn Backend> = match spec.kind {
            ScorerKind::BuiltinOverlap => Box::new(BuiltinOverlap),
            ScorerKind::Subprocess => Box::new(SubprocessBackend::new(&spec)?),
            ScorerKind::Http => Box::new(HttpBackend::new(&spec)),
        };
        Ok(Self::with_backend(spec, backend))
    }

    pub fn with_backend(spec: ScorerSpec, backend: Box<dyn Backend>) -> Self {
        Scorer { spec, backend, cache: None, dispatched: AtomicU64::new(0) }
    }

    pub fn with_cache(mut self, cache: ScoreCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn spec(&self) -> &ScorerSpec {
        &self.spec
    }

    pub fn cache(&self) -> Option<&ScoreCache> {
        self.cache.as_ref()
    }

    /// Requests sent to the backend so far, after cache hits and de-duplication.
    pub fn dispatched(&self) -> u64 {
        self.dispatched.load(Ordering::Relaxed)
    }

    /// Scores `requests`, answering from the cache where possible. Identical
    /// pairs within one call reach the backend once.
    pub fn score_pairs(&self, requests: &[ScoreRequest]) -> Result<Vec<f64>> {
        if requests.is_empty() {
            return Err(Error::invalid("no score requests"));
        }
        let mut ids = HashSet::with_capacity(requests.len());
        for r in requests {
            if r.premise.trim().is_empty() || r.hypothesis.trim().is_empty() {
                return Err(Error::invalid(format!("request {} has an empty premise or hypothesis", r.id)));
            }
            if !ids.insert(r.id) {
                return Err(Error::invalid(format!("duplicate request id {}", r.id)));
            }
        }

        let keys: Vec<String> =
            requests.iter().map(|r| cache_key(&self.spec.scorer_id, &r.premise, &r.hypothesis)).collect();
        let mut scores: Vec<Option<f64>> =
            keys.iter().map(|k| self.cache.as_ref().and_then(|c| c.get(k))).collect();

        let mut pending: HashMap<&str, usize> = HashMap::new();
        let mut misses: Vec<ScoreRequest> = Vec::new();
        for (i, r) in requests.iter().enumerate() {
            if scores[i].is_none() && !pending.contains_key(keys[i].as_str()) {
                pending.insert(keys[i].as_str(), misses.len());
                misses.push(r.clone());
            }
        }

        if !misses.is_empty() {
            self.dispatched.fetch_add(misses.len() as u64, Ordering::Relaxed);
            let fresh = self.backend.score(&misses)?;
            if fresh.len() != misses.len() {
                return Err(Error::PartialResponse {
                    missing: misses.iter().skip(fresh.len()).map(|r| r.id).collect(),
                });
            }
            for (r, &s) in misses.iter().zip(&fresh) {
                if !(0.0..=1.0).contains(&s) {
                    return Err(Error::Protocol { id: Some(r.id), message: format!("score {s} is outside [0, 1]") });
                }
            }
            for (i, key) in keys.iter().enumerate() {
                if scores[i].is_none() {
                    scores[i] = Some(fresh[pending[key.as_str()]]);
                }
            }
            if let Some(cache) = &self.cache {
                for (key, &slot) in &pending {
                    cache.insert(key, &self.spec.scorer_id, fresh[slot])?;
                }
            }
        }
        scores
            .into_iter()
            .map(|s| s.ok_or_else(|| Error::Invariant("request left unscored".into())))
            .collect()
    }
}

/// One-shot scoring without a cache.
pub fn score_pairs(spec: &ScorerSpec, requests: &[ScoreRequest]) -> Result<Vec<f64>> {
    Scorer::new(spec.clone())?.score_pairs(requests)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Mutex;

    /// Records every request it sees and answers with a fixed function.
    struct Recording {
        seen: Mutex<Vec<ScoreRequest>>,
        answer: fn(&ScoreRequest) -> f64,
    }

    impl Backend for Recording {
        fn score(&self, requests: &[ScoreRequest]) -> Result<Vec<f64>> {
            self.seen.lock().unwrap().extend_from_slice(requests);
            Ok(requests.iter().map(self.answer).collect())
        }
    }

    fn recording(answer: fn(&ScoreRequest) -> f64) -> Box<Recording> {
        Box::new(Recording { seen: Mutex::new(vec![]), answer })
    }

    fn reqs() -> Vec<ScoreRequest> {
        vec![
            ScoreRequest::new(0, "the cat sat", "the cat sat"),
            ScoreRequest::new(1, "a b c d", "a b x"),
            ScoreRequest::new(2, "the cat sat", "the cat sat"),
        ]
    }

    #[test]
    fn builtin_scores_in_order() {
        let s = score_pairs(&ScorerSpec::builtin(), &reqs()).unwrap();
        assert_eq!(s[0], 1.0);
        assert!((s[1] - 4.0 / 7.0).abs() < 1e-15);
        assert_eq!(s[2], 1.0);
    }

    #[test]
    fn duplicates_reach_backend_once() {
        let scorer = Scorer::with_backend(ScorerSpec::builtin(), recording(|_| 0.5));
        assert_eq!(scorer.score_pairs(&reqs()).unwrap(), vec![0.5; 3]);
        assert_eq!(scorer.dispatched(), 2);
    }

    #[test]
    fn cache_suppresses_second_call() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let first = Scorer::with_backend(ScorerSpec::builtin(), recording(|r| r.id as f64 / 10.0))
            .with_cache(ScoreCache::open(&path).unwrap());
        let a = first.score_pairs(&reqs()).unwrap();
        drop(first);
        let second = Scorer::with_backend(ScorerSpec::builtin(), recording(|_| 0.99))
            .with_cache(ScoreCache::open(&path).unwrap());
        let b = second.score_pairs(&reqs()).unwrap();
        assert_eq!(a, b);
        assert_eq!(second.dispatched(), 0);
    }

    #[test]
    fn out_of_range_score_names_request() {
        let scorer = Scorer::with_backend(ScorerSpec::builtin(), recording(|r| if r.id == 1 { 1.5 } else { 0.5 }));
        match scorer.score_pairs(&reqs()).unwrap_err() {
            Error::Protocol { id, .. } => assert_eq!(id, Some(1)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn request_checks() {
        let scorer = Scorer::new(ScorerSpec::builtin()).unwrap();
        assert!(scorer.score_pairs(&[]).is_err());
        assert!(scorer.score_pairs(&[ScoreRequest::new(0, " ", "x")]).is_err());
        assert!(scorer.score_pairs(&[ScoreRequest::new(0, "a", "x"), ScoreRequest::new(0, "b", "y")]).is_err());
    }

    #[test]
    fn spec_parsing() {
        assert_eq!(ScorerSpec::parse("builtin").unwrap().kind, ScorerKind::BuiltinOverlap);
        let s = ScorerSpec::parse("subprocess:python3 serve.py --stub").unwrap();
        assert_eq!((s.kind, s.locator.as_str()), (ScorerKind::Subprocess, "python3 serve.py --stub"));
        let h = ScorerSpec::parse("http://localhost:8080").unwrap();
        assert_eq!(h.locator, "http://localhost:8080");
        assert!(ScorerSpec::parse("grpc:x").is_err());
        assert!(ScorerSpec { max_in_flight: 0, ..ScorerSpec::builtin() }.validate().is_err());
        assert!(ScorerSpec::subprocess("").validate().is_err());
    }

    #[test]
    fn deserialized_id_follows_kind() {
        let s: ScorerSpec = serde_json::from_str(r#"{"kind":"subprocess","locator":"nli serve","retries":5}"#).unwrap();
        assert_eq!((s.scorer_id.as_str(), s.retries), ("subprocess:nli serve", 5));
        let s: ScorerSpec = serde_json::from_str(r#"{"kind":"http","locator":"http://h","scorer_id":"m1"}"#).unwrap();
        assert_eq!(s.scorer_id, "m1");
        let s: ScorerSpec = serde_json::from_str("{}").unwrap();
        assert_eq!(s, ScorerSpec::builtin());
        assert!(serde_json::from_str::<ScorerSpec>(r#"{"model":"x"}"#).is_err());
        let back: ScorerSpec = serde_json::from_str(&serde_json::to_string(&ScorerSpec::http("http://h")).unwrap()).unwrap();
        assert_eq!(back, ScorerSpec::http("http://h"));
    }
}
