//! Stand-in scoring process for tests and dry runs. Reads one request per
//! line on stdin and writes `{"id":..,"score":..}` lines on stdout.

use std::fs::OpenOptions;
use std::io::{self, BufRead, Write};
use std::path::PathBuf;
use std::sync::mpsc::{self, RecvTimeoutError};
use std::time::Duration;

use anyhow::{Context, Result};
use clap::{Parser, ValueEnum};
use discofact::scorer::{builtin_overlap, ScoreRequest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    /// Token F1, in request order.
    Overlap,
    /// Token F1, answered in reverse arrival order in small bursts.
    Shuffle,
    /// A fixed score for everything.
    Constant,
}

#[derive(Debug, Parser)]
#[command(name = "discofact-stub-scorer")]
struct Args {
    #[arg(long, value_enum, default_value = "overlap")]
    mode: Mode,
    #[arg(long, default_value_t = 0.5)]
    value: f64,
    /// Append every received request line to this file.
    #[arg(long)]
    call_log: Option<PathBuf>,
    /// Exit without answering once this many requests have been read.
    #[arg(long)]
    crash_after: Option<usize>,
    /// With --crash-after, crash only if this file does not exist yet (it is created).
    #[arg(long)]
    crash_marker: Option<PathBuf>,
    /// Stop answering, but keep reading, once this many requests have been read.
    #[arg(long)]
    hang_after: Option<usize>,
    /// Answer this id with an out-of-range score.
    #[arg(long)]
    bad_score_id: Option<u64>,
    /// Burst size for shuffle mode.
    #[arg(long, default_value_t = 4)]
    window: usize,
}

fn answer(args: &Args, req: &ScoreRequest) -> String {
    let score = if Some(req.id) == args.bad_score_id {
        1.5
    } else if args.mode == Mode::Constant {
        args.value
    } else {
        builtin_overlap(&req.premise, &req.hypothesis)
    };
    serde_json::json!({ "id": req.id, "score": score }).to_string()
}

fn flush(out: &mut impl Write, lines: &mut Vec<String>) -> io::Result<()> {
    while let Some(l) = lines.pop() {
        writeln!(out, "{l}")?;
    }
    out.flush()
}

fn main() -> Result<()> {
    let args = Args::parse();
    let mut log = match &args.call_log {
        Some(p) => Some(OpenOptions::new().create(true).append(true).open(p).with_context(|| p.display().to_string())?),
        None => None,
    };
    let crash_after = match (&args.crash_marker, args.crash_after) {
        (Some(marker), Some(n)) if !marker.exists() => {
            std::fs::write(marker, b"")?;
            Some(n)
        }
        (Some(_), _) => None,
        (None, n) => n,
    };

    let (tx, rx) = mpsc::channel();
    std::thread::spawn(move || {
        for line in io::stdin().lock().lines().map_while(Result::ok) {
            if tx.send(line).is_err() {
                break;
            }
        }
    });

    let stdout = io::stdout();
    let mut out = stdout.lock();
    let mut pending: Vec<String> = Vec::new();
    let mut seen = 0usize;
    loop {
        let line = match rx.recv_timeout(Duration::from_millis(20)) {
            Ok(l) => l,
            Err(RecvTimeoutError::Timeout) => {
                flush(&mut out, &mut pending)?;
                continue;
            }
            Err(RecvTimeoutError::Disconnected) => break,
        };
        if line.trim().is_empty() {
            continue;
        }
        seen += 1;
        if crash_after.is_some_and(|n| seen > n) {
            std::process::exit(17);
        }
        if let Some(f) = log.as_mut() {
            writeln!(f, "{line}")?;
            f.flush()?;
        }
        if args.hang_after.is_some_and(|n| seen > n) {
            continue;
        }
        let req: ScoreRequest = serde_json::from_str(&line).context("malformed request")?;
        pending.push(answer(&args, &req));
        if args.mode != Mode::Shuffle || pending.len() >= args.window.max(1) {
            flush(&mut out, &mut pending)?;
        }
    }
    flush(&mut out, &mut pending)?;
    Ok(())
}
