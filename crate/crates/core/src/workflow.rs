//! Review-queue and adjudication operations on the record store.
//!
//! Review tasks are `review_task` records whose payload is a serialized
//! [`ReviewTask`]. Translation pools are `translation_audit` records keyed
//! `<prompt_id>@<language>`; a human override is stored next to the pool.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::review::{ReviewAction, ReviewError, ReviewTask, TaskKind, TaskStatus};
use crate::sft::{pairs_for_snippet, InstructionPair, VARIANTS_PER_SNIPPET};
use crate::store::{RecordKind, Store, StoreError, StoreRecord};
use crate::text::normalize_whitespace;
use crate::translate::{PoolAudit, TargetLanguage};

#[derive(Debug, Error)]
pub enum WorkflowError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Transition(#[from] ReviewError),
    #[error("{0}")]
    Invalid(String),
    #[error("stored record `{id}` is unreadable: {message}")]
    Decode { id: String, message: String },
}

/// A review task with its store version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VersionedTask {
    #[serde(flatten)]
    pub task: ReviewTask,
    pub version: u64,
    pub updated_ms: u64,
}

fn decode_task(r: StoreRecord) -> Result<VersionedTask, WorkflowError> {
    let task = serde_json::from_value(r.payload).map_err(|e| WorkflowError::Decode { id: r.id, message: e.to_string() })?;
    Ok(VersionedTask { task, version: r.version, updated_ms: r.updated_ms })
}

fn encode<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

/// Adds tasks that are not queued yet. Returns how many were new.
pub fn enqueue(store: &Store, tasks: &[ReviewTask]) -> Result<usize, WorkflowError> {
    store.transact(|t| {
        let mut added = 0;
        for task in tasks {
            if t.get(RecordKind::ReviewTask, &task.id).is_none() {
                t.insert(RecordKind::ReviewTask, &task.id, encode(task))?;
                added += 1;
            }
        }
        Ok(added)
    })
}

pub fn get_task(store: &Store, id: &str) -> Result<VersionedTask, WorkflowError> {
    let r = store
        .get(RecordKind::ReviewTask, id)
        .ok_or_else(|| StoreError::NotFound { kind: RecordKind::ReviewTask, id: id.to_string() })?;
    decode_task(r)
}

pub fn list_tasks(
    store: &Store,
    status: Option<TaskStatus>,
    kind: Option<TaskKind>,
) -> Result<Vec<VersionedTask>, WorkflowError> {
    let mut out = Vec::new();
    for r in store.list(RecordKind::ReviewTask) {
        let t = decode_task(r)?;
        if status.is_none_or(|s| t.task.status == s) && kind.is_none_or(|k| t.task.kind == k) {
            out.push(t);
        }
    }
    Ok(out)
}

fn dedup_key(text: &str) -> String {
    normalize_whitespace(text).to_lowercase()
}

/// The prompt variants of a refinement payload: exactly four, non-empty and
/// pairwise distinct ignoring case and spacing.
pub fn validate_variants(payload: &Value) -> Result<Vec<String>, String> {
    let list = payload.get("variants").and_then(Value::as_array).ok_or("`variants` must be a list of strings")?;
    let variants: Vec<String> = list
        .iter()
        .map(|v| v.as_str().map(str::to_string).ok_or("`variants` must be a list of strings".to_string()))
        .collect::<Result<_, _>>()?;
    if variants.len() != VARIANTS_PER_SNIPPET {
        return Err(format!("expected {VARIANTS_PER_SNIPPET} variants, got {}", variants.len()));
    }
    let mut seen = HashSet::new();
    for (i, v) in variants.iter().enumerate() {
        if v.trim().is_empty() {
            return Err(format!("variant {} is empty", i + 1));
        }
        if !seen.insert(dedup_key(v)) {
            return Err(format!("variant {} duplicates an earlier variant", i + 1));
        }
    }
    Ok(variants)
}

/// Records an accept or reject. Accepting a sample triage queues its prompt
/// refinement in the same transaction; the follow-up is returned when new.
pub fn submit_verdict(
    store: &Store,
    id: &str,
    version: u64,
    accept: bool,
    note: Option<String>,
) -> Result<(VersionedTask, Option<VersionedTask>), WorkflowError> {
    store.transact(|t| {
        let current = t
            .get(RecordKind::ReviewTask, id)
            .ok_or_else(|| StoreError::NotFound { kind: RecordKind::ReviewTask, id: id.to_string() })?;
        if current.version != version {
            return Err(StoreError::Conflict { kind: RecordKind::ReviewTask, id: id.to_string(), expected: version, current: current.version }.into());
        }
        let mut task = decode_task(current)?.task;
        if accept && task.kind == TaskKind::PromptRefine {
            validate_variants(&task.payload)
                .map_err(|reason| WorkflowError::Invalid(format!("cannot accept refinement: {reason}")))?;
        }
        task.apply(if accept { ReviewAction::Accept } else { ReviewAction::Reject }, note)?;
        let updated = t.update(RecordKind::ReviewTask, id, version, encode(&task))?;
        let follow = match task.follow_up() {
            Some(next) if t.get(RecordKind::ReviewTask, &next.id).is_none() => {
                let r = t.insert(RecordKind::ReviewTask, &next.id, encode(&next))?;
                Some(VersionedTask { task: next, version: r.version, updated_ms: r.updated_ms })
            }
            _ => None,
        };
        Ok((VersionedTask { task, version: updated.version, updated_ms: updated.updated_ms }, follow))
    })
}

/// Merges `patch` (an object) over the task payload and moves the task to
/// `edited`. Refinement payloads must keep a valid variant set.
pub fn submit_edit(
    store: &Store,
    id: &str,
    version: u64,
    patch: Value,
    note: Option<String>,
) -> Result<VersionedTask, WorkflowError> {
    let Value::Object(patch) = patch else {
        return Err(WorkflowError::Invalid("edit payload must be an object".into()));
    };
    store.transact(|t| {
        let current = t
            .get(RecordKind::ReviewTask, id)
            .ok_or_else(|| StoreError::NotFound { kind: RecordKind::ReviewTask, id: id.to_string() })?;
        if current.version != version {
            return Err(StoreError::Conflict { kind: RecordKind::ReviewTask, id: id.to_string(), expected: version, current: current.version }.into());
        }
        let mut task = decode_task(current)?.task;
        let mut payload = task.payload.clone();
        match payload.as_object_mut() {
            Some(obj) => obj.extend(patch),
            None => payload = Value::Object(patch),
        }
        if task.kind == TaskKind::PromptRefine && payload.get("variants").is_some() {
            validate_variants(&payload).map_err(WorkflowError::Invalid)?;
        }
        task.apply(ReviewAction::Edit { payload }, note)?;
        let r = t.update(RecordKind::ReviewTask, id, version, encode(&task))?;
        Ok(VersionedTask { task, version: r.version, updated_ms: r.updated_ms })
    })
}

/// Stores machine-suggested variants on a pending refinement without
/// changing its status.
pub fn suggest_variants(store: &Store, id: &str, version: u64, variants: Vec<String>) -> Result<VersionedTask, WorkflowError> {
    let current = get_task(store, id)?;
    let mut task = current.task;
    if task.kind != TaskKind::PromptRefine || task.status != TaskStatus::Pending {
        return Err(WorkflowError::Invalid(format!("`{id}` is not a pending refinement")));
    }
    if let Some(obj) = task.payload.as_object_mut() {
        obj.insert("variants".into(), encode(&variants));
    }
    let r = store.update(RecordKind::ReviewTask, id, version, encode(&task))?;
    Ok(VersionedTask { task, version: r.version, updated_ms: r.updated_ms })
}

/// English pairs of every accepted refinement, in task-id order.
pub fn accepted_pairs(store: &Store) -> Result<Vec<InstructionPair>, WorkflowError> {
    let mut pairs = Vec::new();
    for t in list_tasks(store, Some(TaskStatus::Accepted), Some(TaskKind::PromptRefine))? {
        let p = &t.task.payload;
        let variants = validate_variants(p).map_err(|m| WorkflowError::Invalid(format!("{}: {m}", t.task.id)))?;
        let snippet = p.get("snippet_id").and_then(Value::as_str).unwrap_or_default();
        let code = p.get("code").and_then(Value::as_str).unwrap_or_default();
        pairs.extend(pairs_for_snippet(snippet, code, &variants));
    }
    Ok(pairs)
}

pub fn audit_key(prompt_id: &str, language: TargetLanguage) -> String {
    format!("{prompt_id}@{language}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Override {
    pub index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// One translation pool as stored, with any human override.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredPool {
    #[serde(flatten)]
    pub pool: PoolAudit,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub human_override: Option<Override>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VersionedPool {
    #[serde(flatten)]
    pub stored: StoredPool,
    pub version: u64,
}

impl VersionedPool {
    /// The override if present, else the automatic winner.
    pub fn effective_winner(&self) -> Option<usize> {
        self.stored.human_override.as_ref().map(|o| o.index).or(self.stored.pool.winner)
    }
}

/// Saves pools, replacing earlier runs of the same prompt and language.
/// An existing override is kept only if the candidates are unchanged.
pub fn record_pools(store: &Store, pools: &[PoolAudit]) -> Result<(), WorkflowError> {
    store.transact(|t| {
        for pool in pools {
            let key = audit_key(&pool.prompt_id, pool.language);
            let kept = t
                .get(RecordKind::TranslationAudit, &key)
                .and_then(|r| serde_json::from_value::<StoredPool>(r.payload).ok())
                .filter(|old| old.pool.candidates == pool.candidates)
                .and_then(|old| old.human_override);
            t.upsert(RecordKind::TranslationAudit, &key, encode(&StoredPool { pool: pool.clone(), human_override: kept }))?;
        }
        Ok(())
    })
}

/// All pools of a prompt, in language order.
pub fn pools_for(store: &Store, prompt_id: &str) -> Result<Vec<VersionedPool>, WorkflowError> {
    let mut out = Vec::new();
    for lang in TargetLanguage::ALL {
        if let Some(r) = store.get(RecordKind::TranslationAudit, &audit_key(prompt_id, lang)) {
            let stored = serde_json::from_value(r.payload)
                .map_err(|e| WorkflowError::Decode { id: r.id.clone(), message: e.to_string() })?;
            out.push(VersionedPool { stored, version: r.version });
        }
    }
    Ok(out)
}

/// Sets the human choice for one pool. Excluded candidates cannot be chosen.
pub fn adjudicate(
    store: &Store,
    prompt_id: &str,
    language: TargetLanguage,
    version: u64,
    index: usize,
    note: Option<String>,
) -> Result<VersionedPool, WorkflowError> {
    let key = audit_key(prompt_id, language);
    let r = store
        .get(RecordKind::TranslationAudit, &key)
        .ok_or_else(|| StoreError::NotFound { kind: RecordKind::TranslationAudit, id: key.clone() })?;
    let mut stored: StoredPool =
        serde_json::from_value(r.payload).map_err(|e| WorkflowError::Decode { id: key.clone(), message: e.to_string() })?;
    let cand = stored
        .pool
        .candidates
        .get(index)
        .ok_or_else(|| WorkflowError::Invalid(format!("no candidate {index}; pool has {}", stored.pool.candidates.len())))?;
    if let Some(reason) = &cand.excluded {
        return Err(WorkflowError::Invalid(format!("candidate {index} is excluded: {reason}")));
    }
    stored.human_override = Some(Override { index, note });
    let r = store.update(RecordKind::TranslationAudit, &key, version, encode(&stored))?;
    Ok(VersionedPool { stored, version: r.version })
}
