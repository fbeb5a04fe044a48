//! Embedded record store with optimistic versioning.
//!
//! On-disk layout: a directory holding `records.jsonl`, an append-only log.
//! Each line is one committed transaction, `{"txn": [record, ...]}`, where a
//! record is the full new state of one `(kind, id)` with its version. The
//! current state is the last logged version of every key, rebuilt by replay on
//! open. A torn final line (crash mid-write) is ignored. `compact` rewrites
//! the log to one line per live record.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub const LOG_FILE: &str = "records.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    CorpusDoc,
    SftPair,
    ReviewTask,
    TranslationAudit,
    EvalReport,
    Plan,
    PipelineRun,
}

impl RecordKind {
    pub const ALL: [RecordKind; 7] = [
        Self::CorpusDoc,
        Self::SftPair,
        Self::ReviewTask,
        Self::TranslationAudit,
        Self::EvalReport,
        Self::Plan,
        Self::PipelineRun,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::CorpusDoc => "corpus_doc",
            Self::SftPair => "sft_pair",
            Self::ReviewTask => "review_task",
            Self::TranslationAudit => "translation_audit",
            Self::EvalReport => "eval_report",
            Self::Plan => "plan",
            Self::PipelineRun => "pipeline_run",
        }
    }
}

impl fmt::Display for RecordKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RecordKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| format!("unknown record kind `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreRecord {
    pub kind: RecordKind,
    pub id: String,
    /// Starts at 1 and grows by one per committed change.
    pub version: u64,
    pub created_ms: u64,
    pub updated_ms: u64,
    pub payload: Value,
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{kind} `{id}` not found")]
    NotFound { kind: RecordKind, id: String },
    #[error("{kind} `{id}` already exists")]
    Exists { kind: RecordKind, id: String },
    #[error("{kind} `{id}` is at version {current}, not {expected}")]
    Conflict { kind: RecordKind, id: String, expected: u64, current: u64 },
    #[error("corrupt store log at line {line}: {message}")]
    Corrupt { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

#[derive(Serialize, Deserialize)]
struct LogLine {
    txn: Vec<StoreRecord>,
}

type Key = (RecordKind, String);

struct Inner {
    records: BTreeMap<Key, StoreRecord>,
    log: File,
}

pub struct Store {
    dir: PathBuf,
    inner: Mutex<Inner>,
}

impl fmt::Debug for Store {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Store").field("dir", &self.dir).finish_non_exhaustive()
    }
}

fn replay(path: &Path) -> Result<BTreeMap<Key, StoreRecord>, StoreError> {
    let mut records = BTreeMap::new();
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(records),
        Err(e) => return Err(e.into()),
    };
    let lines: Vec<String> = BufReader::new(file).lines().collect::<Result<_, _>>()?;
    let last = lines.len();
    for (i, line) in lines.into_iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<LogLine>(&line) {
            Ok(entry) => {
                for r in entry.txn {
                    records.insert((r.kind, r.id.clone()), r);
                }
            }
            Err(e) if i + 1 == last => {
                tracing::warn!(line = i + 1, "ignoring torn final log line: {e}");
            }
            Err(e) => return Err(StoreError::Corrupt { line: i + 1, message: e.to_string() }),
        }
    }
    Ok(records)
}

/// Staged writes of one transaction. Reads see earlier writes in the same
/// transaction.
pub struct Txn<'a> {
    base: &'a BTreeMap<Key, StoreRecord>,
    staged: BTreeMap<Key, StoreRecord>,
    now: u64,
}

impl Txn<'_> {
    pub fn get(&self, kind: RecordKind, id: &str) -> Option<StoreRecord> {
        let key = (kind, id.to_string());
        self.staged.get(&key).or_else(|| self.base.get(&key)).cloned()
    }

    pub fn insert(&mut self, kind: RecordKind, id: &str, payload: Value) -> Result<StoreRecord, StoreError> {
        if self.get(kind, id).is_some() {
            return Err(StoreError::Exists { kind, id: id.to_string() });
        }
        let r = StoreRecord { kind, id: id.to_string(), version: 1, created_ms: self.now, updated_ms: self.now, payload };
        self.staged.insert((kind, id.to_string()), r.clone());
        Ok(r)
    }

    /// Replaces the payload if the record is still at `expected_version`.
    pub fn update(
        &mut self,
        kind: RecordKind,
        id: &str,
        expected_version: u64,
        payload: Value,
    ) -> Result<StoreRecord, StoreError> {
        let current = self.get(kind, id).ok_or_else(|| StoreError::NotFound { kind, id: id.to_string() })?;
        if current.version != expected_version {
            return Err(StoreError::Conflict { kind, id: id.to_string(), expected: expected_version, current: current.version });
        }
        let r = StoreRecord { version: current.version + 1, updated_ms: self.now, payload, ..current };
        self.staged.insert((kind, id.to_string()), r.clone());
        Ok(r)
    }

    /// Inserts, or updates whatever version is current.
    pub fn upsert(&mut self, kind: RecordKind, id: &str, payload: Value) -> Result<StoreRecord, StoreError> {
        match self.get(kind, id) {
            Some(cur) => self.update(kind, id, cur.version, payload),
            None => self.insert(kind, id, payload),
        }
    }
}

impl Store {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        let dir = dir.as_ref().to_path_buf();
        std::fs::create_dir_all(&dir)?;
        let path = dir.join(LOG_FILE);
        let records = replay(&path)?;
        let log = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(Self { dir, inner: Mutex::new(Inner { records, log }) })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }

    /// Runs `f` against a consistent snapshot and commits its writes as one
    /// log line. Nothing is written if `f` fails.
    pub fn transact<T, E: From<StoreError>>(&self, f: impl FnOnce(&mut Txn<'_>) -> Result<T, E>) -> Result<T, E> {
        let mut inner = self.lock();
        let mut txn = Txn { base: &inner.records, staged: BTreeMap::new(), now: now_ms() };
        let out = f(&mut txn)?;
        let staged = txn.staged;
        if staged.is_empty() {
            return Ok(out);
        }
        let mut line = serde_json::to_string(&LogLine { txn: staged.values().cloned().collect() })
            .expect("records serialize");
        line.push('\n');
        inner.log.write_all(line.as_bytes()).map_err(StoreError::from)?;
        inner.log.sync_data().map_err(StoreError::from)?;
        inner.records.extend(staged);
        Ok(out)
    }

    pub fn get(&self, kind: RecordKind, id: &str) -> Option<StoreRecord> {
        self.lock().records.get(&(kind, id.to_string())).cloned()
    }

    /// Records of one kind, ordered by id.
    pub fn list(&self, kind: RecordKind) -> Vec<StoreRecord> {
        self.lock().records.range((kind, String::new())..).take_while(|(k, _)| k.0 == kind).map(|(_, r)| r.clone()).collect()
    }

    pub fn insert(&self, kind: RecordKind, id: &str, payload: Value) -> Result<StoreRecord, StoreError> {
        self.transact(|t| t.insert(kind, id, payload))
    }

    pub fn update(&self, kind: RecordKind, id: &str, expected_version: u64, payload: Value) -> Result<StoreRecord, StoreError> {
        self.transact(|t| t.update(kind, id, expected_version, payload))
    }

    pub fn upsert(&self, kind: RecordKind, id: &str, payload: Value) -> Result<StoreRecord, StoreError> {
        self.transact(|t| t.upsert(kind, id, payload))
    }

    /// Writes every live record, one per line, ordered by kind and id.
    pub fn export(&self, path: &Path) -> Result<usize, StoreError> {
        let inner = self.lock();
        let mut text = String::new();
        for r in inner.records.values() {
            text.push_str(&serde_json::to_string(r).expect("record serializes"));
            text.push('\n');
        }
        std::fs::write(path, text)?;
        Ok(inner.records.len())
    }

    /// Loads exported records. A record replaces the stored one only if its
    /// version is higher; returns how many were applied.
    pub fn import(&self, path: &Path) -> Result<usize, StoreError> {
        let text = std::fs::read_to_string(path)?;
        let mut incoming = Vec::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let r: StoreRecord =
                serde_json::from_str(line).map_err(|e| StoreError::Corrupt { line: i + 1, message: e.to_string() })?;
            incoming.push(r);
        }
        let mut inner = self.lock();
        let fresh: Vec<StoreRecord> = incoming
            .into_iter()
            .filter(|r| inner.records.get(&(r.kind, r.id.clone())).is_none_or(|cur| cur.version < r.version))
            .collect();
        if fresh.is_empty() {
            return Ok(0);
        }
        let mut line = serde_json::to_string(&LogLine { txn: fresh.clone() }).expect("records serialize");
        line.push('\n');
        inner.log.write_all(line.as_bytes())?;
        inner.log.sync_data()?;
        let n = fresh.len();
        inner.records.extend(fresh.into_iter().map(|r| ((r.kind, r.id.clone()), r)));
        Ok(n)
    }

    /// Rewrites the log with only the live records.
    pub fn compact(&self) -> Result<(), StoreError> {
        let mut inner = self.lock();
        let tmp = self.dir.join(format!("{LOG_FILE}.tmp"));
        let mut text = String::new();
        for r in inner.records.values() {
            text.push_str(&serde_json::to_string(&LogLine { txn: vec![r.clone()] }).expect("record serializes"));
            text.push('\n');
        }
        std::fs::write(&tmp, text)?;
        File::open(&tmp)?.sync_all()?;
        let path = self.dir.join(LOG_FILE);
        std::fs::rename(&tmp, &path)?;
        inner.log = OpenOptions::new().append(true).open(&path)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn versions_and_conflicts() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let r = store.insert(RecordKind::Plan, "p", json!({"a": 1})).unwrap();
        assert_eq!(r.version, 1);
        assert!(matches!(store.insert(RecordKind::Plan, "p", json!({})), Err(StoreError::Exists { .. })));
        let r2 = store.update(RecordKind::Plan, "p", 1, json!({"a": 2})).unwrap();
        assert_eq!(r2.version, 2);
        match store.update(RecordKind::Plan, "p", 1, json!({"a": 3})) {
            Err(StoreError::Conflict { current: 2, expected: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(matches!(store.update(RecordKind::Plan, "q", 1, json!({})), Err(StoreError::NotFound { .. })));
    }

    #[test]
    fn reopen_replays_log() {
        let dir = tempfile::tempdir().unwrap();
        {
            let store = Store::open(dir.path()).unwrap();
            store.insert(RecordKind::ReviewTask, "b", json!({"x": [1, 2.5, "s"]})).unwrap();
            store.insert(RecordKind::ReviewTask, "a", json!(null)).unwrap();
            store.update(RecordKind::ReviewTask, "b", 1, json!({"x": "new"})).unwrap();
            store.insert(RecordKind::Plan, "z", json!(1)).unwrap();
        }
        let store = Store::open(dir.path()).unwrap();
        let tasks = store.list(RecordKind::ReviewTask);
        assert_eq!(tasks.iter().map(|r| r.id.as_str()).collect::<Vec<_>>(), ["a", "b"]);
        assert_eq!(tasks[1].version, 2);
        assert_eq!(tasks[1].payload, json!({"x": "new"}));
        assert_eq!(store.list(RecordKind::Plan).len(), 1);
        assert!(store.list(RecordKind::EvalReport).is_empty());
    }

    #[test]
    fn failed_transaction_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        store.insert(RecordKind::Plan, "a", json!(1)).unwrap();
        let res = store.transact(|t| {
            t.insert(RecordKind::Plan, "b", json!(2))?;
            t.update(RecordKind::Plan, "a", 7, json!(3))
        });
        assert!(res.is_err());
        assert!(store.get(RecordKind::Plan, "b").is_none());
        drop(store);
        assert!(Store::open(dir.path()).unwrap().get(RecordKind::Plan, "b").is_none());
    }

    #[test]
    fn torn_tail_is_ignored() {
        let dir = tempfile::tempdir().unwrap();
        {
            let store = Store::open(dir.path()).unwrap();
            store.insert(RecordKind::Plan, "a", json!(1)).unwrap();
        }
        let mut f = OpenOptions::new().append(true).open(dir.path().join(LOG_FILE)).unwrap();
        f.write_all(b"{\"txn\": [{\"kind\": \"pl").unwrap();
        let store = Store::open(dir.path()).unwrap();
        assert_eq!(store.get(RecordKind::Plan, "a").unwrap().payload, json!(1));
    }

    #[test]
    fn export_import_and_compact() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let src = Store::open(a.path()).unwrap();
        src.insert(RecordKind::SftPair, "s#1", json!({"prompt": "p"})).unwrap();
        src.update(RecordKind::SftPair, "s#1", 1, json!({"prompt": "q"})).unwrap();
        src.insert(RecordKind::Plan, "p", json!({})).unwrap();
        let out = a.path().join("export.jsonl");
        assert_eq!(src.export(&out).unwrap(), 2);

        let dst = Store::open(b.path()).unwrap();
        assert_eq!(dst.import(&out).unwrap(), 2);
        assert_eq!(dst.import(&out).unwrap(), 0);
        assert_eq!(dst.get(RecordKind::SftPair, "s#1").unwrap().version, 2);

        src.compact().unwrap();
        src.insert(RecordKind::Plan, "after", json!(0)).unwrap();
        drop(src);
        let reopened = Store::open(a.path()).unwrap();
        assert_eq!(reopened.get(RecordKind::SftPair, "s#1").unwrap().payload, json!({"prompt": "q"}));
        assert!(reopened.get(RecordKind::Plan, "after").is_some());
    }
}
