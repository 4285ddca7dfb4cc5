//! Append-only JSON-lines stores with an in-memory mirror for reads.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use parking_lot::{Mutex, RwLock};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::analytics::{FeedbackEntry, LatencyRecord, ScoreRecord};

/// Reads every well-formed line. A torn final line (crash mid-write) is
/// skipped with a warning; anything else malformed is an error.
pub fn replay<T: DeserializeOwned>(path: impl AsRef<Path>) -> std::io::Result<Vec<T>> {
    let path = path.as_ref();
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e),
    };
    let lines: Vec<String> = BufReader::new(file).lines().collect::<Result<_, _>>()?;
    let mut out = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(v) => out.push(v),
            Err(_) if i + 1 == lines.len() => {
                tracing::warn!(path = %path.display(), line = i + 1, "skipping torn final line");
            }
            Err(e) => {
                return Err(std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    format!("{}:{}: {e}", path.display(), i + 1),
                ))
            }
        }
    }
    Ok(out)
}

/// One file, one appender. Every append is flushed before it is visible
/// to readers.
pub struct JsonlStore<T> {
    path: Option<PathBuf>,
    writer: Mutex<Option<BufWriter<File>>>,
    items: RwLock<Vec<T>>,
}

impl<T: Serialize + DeserializeOwned + Clone> JsonlStore<T> {
    pub fn open(path: impl Into<PathBuf>) -> std::io::Result<Self> {
        let path = path.into();
        let items = replay(&path)?;
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(Self {
            path: Some(path),
            writer: Mutex::new(Some(BufWriter::new(file))),
            items: RwLock::new(items),
        })
    }

    pub fn in_memory() -> Self {
        Self {
            path: None,
            writer: Mutex::new(None),
            items: RwLock::new(Vec::new()),
        }
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn append(&self, item: T) -> std::io::Result<()> {
        let mut writer = self.writer.lock();
        if let Some(w) = writer.as_mut() {
            serde_json::to_writer(&mut *w, &item)?;
            w.write_all(b"\n")?;
            w.flush()?;
        }
        self.items.write().push(item);
        Ok(())
    }

    /// Appends only if no stored item satisfies `exists`. Returns whether
    /// the item was written.
    pub fn append_unless(&self, item: T, exists: impl Fn(&T) -> bool) -> std::io::Result<bool> {
        let mut writer = self.writer.lock();
        if self.items.read().iter().any(exists) {
            return Ok(false);
        }
        if let Some(w) = writer.as_mut() {
            serde_json::to_writer(&mut *w, &item)?;
            w.write_all(b"\n")?;
            w.flush()?;
        }
        self.items.write().push(item);
        Ok(true)
    }

    pub fn snapshot(&self) -> Vec<T> {
        self.items.read().clone()
    }

    pub fn len(&self) -> usize {
        self.items.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn flush(&self) -> std::io::Result<()> {
        if let Some(w) = self.writer.lock().as_mut() {
            w.flush()?;
            w.get_ref().sync_data()?;
        }
        Ok(())
    }
}

pub const FEEDBACK_FILE: &str = "feedback.jsonl";
pub const SCORES_FILE: &str = "scores.jsonl";
pub const LATENCY_FILE: &str = "latency.jsonl";

pub struct Stores {
    pub feedback: JsonlStore<FeedbackEntry>,
    pub scores: JsonlStore<ScoreRecord>,
    pub latency: JsonlStore<LatencyRecord>,
}

impl Stores {
    /// Opens (creating if needed) the three stores under `dir`.
    pub fn open(dir: impl AsRef<Path>) -> std::io::Result<Self> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            feedback: JsonlStore::open(dir.join(FEEDBACK_FILE))?,
            scores: JsonlStore::open(dir.join(SCORES_FILE))?,
            latency: JsonlStore::open(dir.join(LATENCY_FILE))?,
        })
    }

    pub fn in_memory() -> Self {
        Self {
            feedback: JsonlStore::in_memory(),
            scores: JsonlStore::in_memory(),
            latency: JsonlStore::in_memory(),
        }
    }

    pub fn flush(&self) -> std::io::Result<()> {
        self.feedback.flush()?;
        self.scores.flush()?;
        self.latency.flush()
    }
}
