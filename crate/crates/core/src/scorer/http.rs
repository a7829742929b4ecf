use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scorer::{Backend, ScoreRequest, ScorerSpec};

const BATCH: usize = 32;

#[derive(Serialize)]
struct Pair<'a> {
    premise: &'a str,
    hypothesis: &'a str,
}

#[derive(Serialize)]
struct Body<'a> {
    pairs: Vec<Pair<'a>>,
}

#[derive(Deserialize)]
struct Reply {
    scores: Vec<f64>,
}

/// Batched JSON client for `POST {base}/v1/score`.
#[derive(Debug)]
pub struct HttpBackend {
    endpoint: String,
    agent: ureq::Agent,
    max_in_flight: usize,
    retries: u32,
}

impl HttpBackend {
    pub fn new(spec: &ScorerSpec) -> Self {
        let config = ureq::Agent::config_builder().timeout_global(Some(spec.timeout())).http_status_as_error(true).build();
        HttpBackend {
            endpoint: format!("{}/v1/score", spec.locator.trim_end_matches('/')),
            agent: config.into(),
            max_in_flight: spec.max_in_flight.max(1),
            retries: spec.retries,
        }
    }

    fn post(&self, batch: &[ScoreRequest]) -> Result<Vec<f64>> {
        let body = Body { pairs: batch.iter().map(|r| Pair { premise: &r.premise, hypothesis: &r.hypothesis }).collect() };
        let mut attempt = 0;
        loop {
            let outcome = self.agent.post(&self.endpoint).send_json(&body).and_then(|mut r| r.body_mut().read_json::<Reply>());
            let err = match outcome {
                Ok(reply) if reply.scores.len() == batch.len() => return Ok(reply.scores),
                Ok(reply) => {
                    return Err(Error::Protocol {
                        id: batch.first().map(|r| r.id),
                        message: format!("expected {} scores, got {}", batch.len(), reply.scores.len()),
                    })
                }
                Err(ureq::Error::StatusCode(code)) if (400..500).contains(&code) => {
                    return Err(Error::Protocol { id: batch.first().map(|r| r.id), message: format!("HTTP {code}") })
                }
                Err(ureq::Error::Json(e)) => {
                    return Err(Error::Protocol { id: batch.first().map(|r| r.id), message: format!("bad reply: {e}") })
                }
                Err(e) => e,
            };
            attempt += 1;
            if attempt > self.retries {
                return Err(Error::Transport(format!("{}: {err}", self.endpoint)));
            }
            log::warn!("{}: {err}; retrying ({attempt} of {})", self.endpoint, self.retries);
            thread::sleep(Duration::from_millis(50 * u64::from(attempt)));
        }
    }
}

impl Backend for HttpBackend {
    fn score(&self, requests: &[ScoreRequest]) -> Result<Vec<f64>> {
        let batches: Vec<&[ScoreRequest]> = requests.chunks(BATCH).collect();
        let mut out = Vec::with_capacity(requests.len());
        for wave in batches.chunks(self.max_in_flight) {
            let results: Vec<Result<Vec<f64>>> = thread::scope(|s| {
                let handles: Vec<_> = wave.iter().map(|b| s.spawn(move || self.post(b))).collect();
                handles.into_iter().map(|h| h.join().unwrap_or_else(|_| Err(Error::Invariant("HTTP worker panicked".into())))).collect()
            });
            for r in results {
                out.extend(r?);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    /// Minimal HTTP/1.1 server answering every POST with the token F1 of
    /// each pair. The first `fail_first` requests get a 503.
    fn serve(fail_first: usize) -> (String, Arc<AtomicUsize>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let hits = Arc::new(AtomicUsize::new(0));
        let counter = hits.clone();
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { continue };
                let n = counter.fetch_add(1, Ordering::SeqCst);
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0;
                loop {
                    let mut line = String::new();
                    if reader.read_line(&mut line).unwrap() == 0 || line == "\r\n" {
                        break;
                    }
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                }
                let mut body = vec![0; len];
                reader.read_exact(&mut body).unwrap();
                let (status, reply) = if n < fail_first {
                    ("503 Service Unavailable", "{}".to_string())
                } else {
                    let v: serde_json::Value = serde_json::from_slice(&body).unwrap();
                    let scores: Vec<f64> = v["pairs"]
                        .as_array()
                        .unwrap()
                        .iter()
                        .map(|p| {
                            crate::scorer::builtin_overlap(p["premise"].as_str().unwrap(), p["hypothesis"].as_str().unwrap())
                        })
                        .collect();
                    ("200 OK", serde_json::json!({ "scores": scores }).to_string())
                };
                let _ = write!(
                    stream,
                    "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
                    reply.len()
                );
            }
        });
        (format!("http://{addr}"), hits)
    }

    fn requests(n: u64) -> Vec<ScoreRequest> {
        (0..n).map(|i| ScoreRequest::new(i, format!("alpha beta {i}"), format!("alpha {i}"))).collect()
    }

    #[test]
    fn batches_keep_request_order() {
        let (url, hits) = serve(0);
        let backend = HttpBackend::new(&ScorerSpec { max_in_flight: 2, ..ScorerSpec::http(url) });
        let reqs = requests(100);
        let got = backend.score(&reqs).unwrap();
        let want: Vec<f64> = reqs.iter().map(|r| crate::scorer::builtin_overlap(&r.premise, &r.hypothesis)).collect();
        assert_eq!(got, want);
        assert_eq!(hits.load(Ordering::SeqCst), 4);
    }

    #[test]
    fn server_errors_are_retried() {
        let (url, _) = serve(1);
        let backend = HttpBackend::new(&ScorerSpec { retries: 1, ..ScorerSpec::http(url) });
        assert_eq!(backend.score(&requests(3)).unwrap().len(), 3);
    }

    #[test]
    fn exhausted_retries_are_transport_errors() {
        let (url, _) = serve(usize::MAX);
        let backend = HttpBackend::new(&ScorerSpec { retries: 1, ..ScorerSpec::http(url) });
        assert!(matches!(backend.score(&requests(3)), Err(Error::Transport(_))));
    }
}
