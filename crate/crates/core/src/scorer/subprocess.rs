use std::collections::{HashMap, VecDeque};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::scorer::{Backend, ScoreRequest, ScorerSpec};

#[derive(Debug, Deserialize)]
struct WireResponse {
    id: u64,
    score: f64,
}

enum Event {
    Line(String),
    Eof,
}

struct Worker {
    child: Child,
    stdin: BufWriter<ChildStdin>,
    events: Receiver<Event>,
}

impl Worker {
    fn spawn(argv: &[String]) -> Result<Self> {
        let mut child = Command::new(&argv[0])
            .args(&argv[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Transport(format!("cannot start scorer {:?}: {e}", argv[0])))?;
        let stdin = child.stdin.take().ok_or_else(|| Error::Transport("scorer stdin unavailable".into()))?;
        let stdout = child.stdout.take().ok_or_else(|| Error::Transport("scorer stdout unavailable".into()))?;
        let (tx, events) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                match line {
                    Ok(l) => {
                        if tx.send(Event::Line(l)).is_err() {
                            return;
                        }
                    }
                    Err(_) => break,
                }
            }
            let _ = tx.send(Event::Eof);
        });
        Ok(Worker { child, stdin: BufWriter::new(stdin), events })
    }

    fn send(&mut self, req: &ScoreRequest) -> std::io::Result<()> {
        let line = serde_json::to_string(req).expect("request serializes");
        writeln!(self.stdin, "{line}")?;
        self.stdin.flush()
    }

    fn shutdown(mut self) {
        drop(self.stdin);
        for _ in 0..20 {
            if let Ok(Some(_)) = self.child.try_wait() {
                return;
            }
            thread::sleep(Duration::from_millis(10));
        }
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

enum Failure {
    Eof,
    Timeout,
    Write(std::io::Error),
}

/// Long-lived child process speaking one JSON object per line in each
/// direction. Responses may arrive in any order and are matched by id.
pub struct SubprocessBackend {
    argv: Vec<String>,
    max_in_flight: usize,
    timeout: Duration,
    retries: u32,
    worker: Mutex<Option<Worker>>,
}

impl std::fmt::Debug for SubprocessBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SubprocessBackend").field("argv", &self.argv).finish()
    }
}

impl SubprocessBackend {
    /// Parses the command line but defers spawning to the first request.
    pub fn new(spec: &ScorerSpec) -> Result<Self> {
        let argv = shlex::split(&spec.locator)
            .filter(|a| !a.is_empty())
            .ok_or_else(|| Error::invalid(format!("cannot parse scorer command {:?}", spec.locator)))?;
        Ok(SubprocessBackend {
            argv,
            max_in_flight: spec.max_in_flight.max(1),
            timeout: spec.timeout(),
            retries: spec.retries,
            worker: Mutex::new(None),
        })
    }

    /// One pass over `todo` with the current worker. Scores land in `done`.
    fn run(
        &self,
        worker: &mut Worker,
        todo: &[&ScoreRequest],
        done: &mut HashMap<u64, f64>,
    ) -> std::result::Result<Result<()>, Failure> {
        let mut queue: VecDeque<&ScoreRequest> = todo.iter().copied().collect();
        let mut in_flight: HashMap<u64, ()> = HashMap::new();
        loop {
            while in_flight.len() < self.max_in_flight {
                let Some(req) = queue.pop_front() else { break };
                worker.send(req).map_err(Failure::Write)?;
                in_flight.insert(req.id, ());
            }
            if in_flight.is_empty() {
                return Ok(Ok(()));
            }
            let line = match worker.events.recv_timeout(self.timeout) {
                Ok(Event::Line(l)) => l,
                Ok(Event::Eof) | Err(RecvTimeoutError::Disconnected) => return Err(Failure::Eof),
                Err(RecvTimeoutError::Timeout) => return Err(Failure::Timeout),
            };
            if line.trim().is_empty() {
                continue;
            }
            let resp: WireResponse = match serde_json::from_str(&line) {
                Ok(r) => r,
                Err(e) => {
                    return Ok(Err(Error::Protocol { id: None, message: format!("unreadable response {line:?}: {e}") }))
                }
            };
            if in_flight.remove(&resp.id).is_none() {
                return Ok(Err(Error::Protocol {
                    id: Some(resp.id),
                    message: "response for an id that is not in flight".into(),
                }));
            }
            if !(0.0..=1.0).contains(&resp.score) {
                return Ok(Err(Error::Protocol {
                    id: Some(resp.id),
                    message: format!("score {} is outside [0, 1]", resp.score),
                }));
            }
            done.insert(resp.id, resp.score);
        }
    }
}

impl Backend for SubprocessBackend {
    fn score(&self, requests: &[ScoreRequest]) -> Result<Vec<f64>> {
        let mut slot = self.worker.lock().map_err(|_| Error::Invariant("scorer worker lock poisoned".into()))?;
        let mut done: HashMap<u64, f64> = HashMap::with_capacity(requests.len());
        let mut attempt = 0;
        loop {
            let todo: Vec<&ScoreRequest> = requests.iter().filter(|r| !done.contains_key(&r.id)).collect();
            if todo.is_empty() {
                break;
            }
            if slot.is_none() {
                *slot = Some(Worker::spawn(&self.argv)?);
            }
            let worker = slot.as_mut().expect("worker just spawned");
            let failure = match self.run(worker, &todo, &mut done) {
                Ok(Ok(())) => continue,
                Ok(Err(e)) => {
                    // the stream is out of sync; start fresh next time
                    if let Some(w) = slot.take() {
                        w.shutdown();
                    }
                    return Err(e);
                }
                Err(f) => f,
            };
            if let Some(w) = slot.take() {
                w.shutdown();
            }
            attempt += 1;
            let missing: Vec<u64> = requests.iter().map(|r| r.id).filter(|id| !done.contains_key(id)).collect();
            if attempt > self.retries {
                return Err(match failure {
                    Failure::Eof => Error::PartialResponse { missing },
                    Failure::Timeout => {
                        Error::Transport(format!("scorer timed out after {:?} with {} pending", self.timeout, missing.len()))
                    }
                    Failure::Write(e) => Error::Transport(format!("cannot write to scorer: {e}")),
                });
            }
            log::warn!("scorer process failed, restarting ({} of {}); {} pending", attempt, self.retries, missing.len());
        }
        Ok(requests.iter().map(|r| done[&r.id]).collect())
    }
}

impl Drop for SubprocessBackend {
    fn drop(&mut self) {
        if let Ok(mut slot) = self.worker.lock() {
            if let Some(w) = slot.take() {
                w.shutdown();
            }
        }
    }
}
