//! Content-addressed version store.
//!
//! Layout under the store directory:
//!
//! ```text
//! versions/<id>.bnkb   canonical serialization of each version, immutable
//! log.jsonl            one LogEntry per line, append-only
//! HEAD                 id of the latest snapshot, default parent of the next
//! ```
//!
//! Version files and HEAD are written to a temporary file and renamed into
//! place, so readers never see a partial file. The store assumes a single
//! writer.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use bnforge_core::dsl::{parse_kb, serialize_kb, KnowledgeBase};
use bnforge_core::versioning::content_id;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formats;

/// Shortest id prefix accepted in place of a full id.
pub const MIN_PREFIX: usize = 4;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store i/o on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("unknown version `{0}`")]
    UnknownVersion(String),
    #[error("version prefix `{0}` is ambiguous")]
    AmbiguousPrefix(String),
    #[error("corrupt store: {0}")]
    Corrupt(String),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEntry {
    pub version_id: String,
    pub parent_id: Option<String>,
    pub message: String,
    pub rationale: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Store { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn versions_dir(&self) -> PathBuf {
        self.root.join("versions")
    }

    fn version_path(&self, id: &str) -> PathBuf {
        self.versions_dir().join(format!("{id}.bnkb"))
    }

    fn log_path(&self) -> PathBuf {
        self.root.join("log.jsonl")
    }

    fn head_path(&self) -> PathBuf {
        self.root.join("HEAD")
    }

    fn write_atomic(&self, path: &Path, bytes: &str) -> Result<(), StoreError> {
        formats::write_atomic(path, bytes).map_err(io_err(path))
    }

    pub fn head(&self) -> Result<Option<String>, StoreError> {
        let path = self.head_path();
        match fs::read_to_string(&path) {
            Ok(s) => Ok(Some(s.trim().to_string()).filter(|s| !s.is_empty())),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(io_err(&path)(e)),
        }
    }

    pub fn contains(&self, id: &str) -> bool {
        self.version_path(id).is_file()
    }

    /// Stores `kb` unless an identical version exists, and moves HEAD to it.
    /// `parent` defaults to the current HEAD. Returns the log entry of the
    /// new or existing version.
    pub fn snapshot(
        &self,
        kb: &KnowledgeBase,
        message: &str,
        rationale: &str,
        parent: Option<String>,
        timestamp: u64,
    ) -> Result<LogEntry, StoreError> {
        let id = content_id(kb);
        if self.contains(&id) {
            let existing = self
                .log()?
                .into_iter()
                .find(|e| e.version_id == id)
                .ok_or_else(|| StoreError::Corrupt(format!("version {id} has no log entry")))?;
            self.write_atomic(&self.head_path(), &format!("{id}\n"))?;
            return Ok(existing);
        }
        let parent_id = match parent {
            Some(p) => Some(self.resolve(&p)?),
            None => self.head()?,
        };
        let dir = self.versions_dir();
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        self.write_atomic(&self.version_path(&id), &serialize_kb(kb))?;

        let entry = LogEntry {
            version_id: id.clone(),
            parent_id,
            message: message.to_string(),
            rationale: rationale.to_string(),
            timestamp,
        };
        let log = self.log_path();
        let mut line = serde_json::to_string(&entry).expect("log entries serialize");
        line.push('\n');
        let mut f = OpenOptions::new().create(true).append(true).open(&log).map_err(io_err(&log))?;
        f.write_all(line.as_bytes()).map_err(io_err(&log))?;
        f.sync_all().map_err(io_err(&log))?;
        self.write_atomic(&self.head_path(), &format!("{id}\n"))?;
        Ok(entry)
    }

    /// Full id for a full id or a unique prefix of at least [`MIN_PREFIX`]
    /// characters.
    pub fn resolve(&self, id: &str) -> Result<String, StoreError> {
        if self.contains(id) {
            return Ok(id.to_string());
        }
        if id.len() < MIN_PREFIX || !id.chars().all(|c| c.is_ascii_hexdigit()) {
            return Err(StoreError::UnknownVersion(id.to_string()));
        }
        let dir = self.versions_dir();
        let entries = match fs::read_dir(&dir) {
            Ok(e) => e,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(StoreError::UnknownVersion(id.to_string())),
            Err(e) => return Err(io_err(&dir)(e)),
        };
        let mut found = BTreeSet::new();
        for entry in entries {
            let name = entry.map_err(io_err(&dir))?.file_name().to_string_lossy().into_owned();
            if let Some(stem) = name.strip_suffix(".bnkb") {
                if stem.starts_with(id) {
                    found.insert(stem.to_string());
                }
            }
        }
        match found.len() {
            0 => Err(StoreError::UnknownVersion(id.to_string())),
            1 => Ok(found.into_iter().next().expect("one element")),
            _ => Err(StoreError::AmbiguousPrefix(id.to_string())),
        }
    }

    /// Parsed knowledge base of a stored version.
    pub fn load(&self, id: &str) -> Result<KnowledgeBase, StoreError> {
        let id = self.resolve(id)?;
        let path = self.version_path(&id);
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let kb = parse_kb(&text).map_err(|d| {
            let first = d.first().map(|d| d.to_string()).unwrap_or_default();
            StoreError::Corrupt(format!("version {id} does not parse: {first}"))
        })?;
        if content_id(&kb) != id {
            return Err(StoreError::Corrupt(format!("version {id} does not match its content")));
        }
        Ok(kb)
    }

    /// History with parents before children; siblings and independent roots
    /// by timestamp, then id.
    pub fn log(&self) -> Result<Vec<LogEntry>, StoreError> {
        let path = self.log_path();
        let file = match File::open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(io_err(&path)(e)),
        };
        let mut entries: BTreeMap<String, LogEntry> = BTreeMap::new();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(io_err(&path))?;
            if line.trim().is_empty() {
                continue;
            }
            let e: LogEntry =
                serde_json::from_str(&line).map_err(|err| StoreError::Corrupt(format!("log line {}: {err}", n + 1)))?;
            entries.entry(e.version_id.clone()).or_insert(e);
        }

        let mut children: BTreeMap<&str, Vec<&LogEntry>> = BTreeMap::new();
        let mut ready: BTreeSet<(u64, &str)> = BTreeSet::new();
        for e in entries.values() {
            match e.parent_id.as_deref().filter(|p| entries.contains_key(*p)) {
                Some(p) => children.entry(p).or_default().push(e),
                None => {
                    ready.insert((e.timestamp, e.version_id.as_str()));
                }
            }
        }
        let mut out = Vec::with_capacity(entries.len());
        while let Some(next) = ready.pop_first() {
            let e = &entries[next.1];
            out.push(e.clone());
            for c in children.get(e.version_id.as_str()).into_iter().flatten() {
                ready.insert((c.timestamp, c.version_id.as_str()));
            }
        }
        if out.len() != entries.len() {
            return Err(StoreError::Corrupt("parent chain contains a cycle".into()));
        }
        Ok(out)
    }
}
