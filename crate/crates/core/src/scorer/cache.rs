use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// SHA-256 over the length-prefixed fields `scorer_id`, `premise`,
/// `hypothesis`, hex encoded. Lengths are little-endian u64 byte counts.
pub fn cache_key(scorer_id: &str, premise: &str, hypothesis: &str) -> String {
    let mut h = Sha256::new();
    for field in [scorer_id, premise, hypothesis] {
        h.update((field.len() as u64).to_le_bytes());
        h.update(field.as_bytes());
    }
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub key: String,
    pub score: f64,
    pub scorer_id: String,
}

/// Append-only score log, loaded into memory on open.
#[derive(Debug)]
pub struct ScoreCache {
    path: PathBuf,
    entries: RwLock<HashMap<String, f64>>,
    writer: Mutex<BufWriter<File>>,
}

impl ScoreCache {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut entries = HashMap::new();
        if path.exists() {
            let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
            for (n, line) in BufReader::new(file).lines().enumerate() {
                let line = line.map_err(|e| Error::io(&path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<CacheRecord>(&line) {
                    Ok(rec) if (0.0..=1.0).contains(&rec.score) => {
                        entries.insert(rec.key, rec.score);
                    }
                    _ => log::warn!("{}: skipping unreadable cache line {}", path.display(), n + 1),
                }
            }
        } else if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let mut file = OpenOptions::new().create(true).append(true).open(&path).map_err(|e| Error::io(&path, e))?;
        // a torn final line must not swallow the next record
        let torn = std::fs::read(&path).map_err(|e| Error::io(&path, e))?.last().is_some_and(|&b| b != b'\n');
        if torn {
            file.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
        }
        Ok(ScoreCache { path, entries: RwLock::new(entries), writer: Mutex::new(BufWriter::new(file)) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.entries.read().expect("cache lock poisoned").get(key).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Appends a record unless the key is already present.
    pub fn insert(&self, key: &str, scorer_id: &str, score: f64) -> Result<()> {
        let mut writer = self.writer.lock().expect("cache writer poisoned");
        if self.get(key).is_some() {
            return Ok(());
        }
        let rec = CacheRecord { key: key.to_string(), score, scorer_id: scorer_id.to_string() };
        let line = serde_json::to_string(&rec).map_err(|e| Error::Invariant(e.to_string()))?;
        writeln!(writer, "{line}").and_then(|_| writer.flush()).map_err(|e| Error::io(&self.path, e))?;
        self.entries.write().expect("cache lock poisoned").insert(rec.key, score);
        Ok(())
    }
}
