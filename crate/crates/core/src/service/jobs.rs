//! Background evaluation and pipeline runs. Each job is a store record whose
//! `status` moves `queued -> running -> done | failed`.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::corpus::{ingest_sources, run_pipeline, write_corpus, ManifestEntry, NearDupConfig, PipelineConfig, RawDocument};
use crate::eval::{evaluate_model, BenchmarkTask, CanonicalGenerator, EvalOptions, Generator, ModelInfo};
use crate::store::{RecordKind, Store};

use super::AppState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
}

static COUNTER: AtomicU64 = AtomicU64::new(0);

pub(super) fn new_job_id(prefix: &str) -> String {
    let ms = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0);
    format!("{prefix}-{ms}-{}", COUNTER.fetch_add(1, Ordering::Relaxed))
}

fn set_status(store: &Store, kind: RecordKind, id: &str, status: JobStatus, extra: Value) {
    let res = store.transact(|t| {
        let mut payload = t.get(kind, id).map(|r| r.payload).unwrap_or_else(|| json!({}));
        payload["status"] = json!(status);
        if let (Some(obj), Value::Object(more)) = (payload.as_object_mut(), extra) {
            obj.extend(more);
        }
        t.upsert(kind, id, payload)
    });
    if let Err(e) = res {
        tracing::error!(job = id, "cannot record job status: {e}");
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct EvalSubmission {
    #[serde(default)]
    pub model: Option<ModelInfo>,
    /// Inline tasks; takes precedence over `benchmark`.
    #[serde(default)]
    pub tasks: Option<Vec<BenchmarkTask>>,
    /// Benchmark file on the server.
    #[serde(default)]
    pub benchmark: Option<PathBuf>,
    /// Completions per task id, one per sample. Without it the canonical
    /// solutions are evaluated.
    #[serde(default)]
    pub completions: Option<BTreeMap<String, Vec<String>>>,
    #[serde(default = "one")]
    pub samples: u64,
    #[serde(default = "ks")]
    pub ks: Vec<u64>,
    #[serde(default)]
    pub decoding: Option<String>,
}

fn one() -> u64 {
    1
}

fn ks() -> Vec<u64> {
    vec![1]
}

struct Fixed(BTreeMap<String, Vec<String>>);

impl Generator for Fixed {
    fn generate(&self, task: &BenchmarkTask, sample_index: usize) -> Result<String, String> {
        self.0
            .get(&task.task_id)
            .and_then(|c| c.get(sample_index))
            .cloned()
            .ok_or_else(|| format!("no completion {sample_index} for `{}`", task.task_id))
    }
}

/// Resolves the task list up front so bad submissions fail synchronously.
pub(super) fn submission_tasks(sub: &EvalSubmission) -> Result<Vec<BenchmarkTask>, String> {
    match (&sub.tasks, &sub.benchmark) {
        (Some(tasks), _) if tasks.is_empty() => Err("no tasks".into()),
        (Some(tasks), _) => Ok(tasks.clone()),
        (None, Some(path)) => crate::eval::load_benchmark(path).map_err(|e| e.to_string()),
        (None, None) => Err("submission needs `tasks` or `benchmark`".into()),
    }
}

pub(super) fn run_eval(state: Arc<AppState>, id: String, sub: EvalSubmission, tasks: Vec<BenchmarkTask>) {
    let store = &state.store;
    set_status(store, RecordKind::EvalReport, &id, JobStatus::Running, json!({}));
    let model = sub.model.clone().unwrap_or_else(|| ModelInfo::named("submission"));
    let options = EvalOptions { samples: sub.samples, ks: sub.ks.clone(), decoding: sub.decoding.clone(), ..EvalOptions::default() };
    let generator: Box<dyn Generator> = match sub.completions {
        Some(c) => Box::new(Fixed(c)),
        None => Box::new(CanonicalGenerator),
    };
    match evaluate_model(model, generator.as_ref(), &tasks, &options, &state.adapter, &state.policy) {
        Ok(report) => set_status(store, RecordKind::EvalReport, &id, JobStatus::Done, json!({ "report": report })),
        Err(e) => set_status(store, RecordKind::EvalReport, &id, JobStatus::Failed, json!({ "error": e.to_string() })),
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct PipelineSubmission {
    /// Manifest entries to ingest.
    #[serde(default)]
    pub manifest: Option<Vec<ManifestEntry>>,
    /// Manifest file on the server.
    #[serde(default)]
    pub manifest_path: Option<PathBuf>,
    /// Already-ingested documents.
    #[serde(default)]
    pub documents: Option<Vec<RawDocument>>,
    #[serde(default)]
    pub near_dup: bool,
    /// Directory that receives `refined.jsonl`.
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn pipeline_corpus(state: &AppState, sub: &mut PipelineSubmission) -> Result<(Vec<RawDocument>, Value), String> {
    if let Some(docs) = sub.documents.take() {
        return Ok((docs, json!([])));
    }
    let manifest = match (sub.manifest.take(), &sub.manifest_path) {
        (Some(m), _) => m,
        (None, Some(p)) => crate::corpus::read_manifest(p).map_err(|e| e.to_string())?,
        (None, None) => return Err("submission needs `documents`, `manifest` or `manifest_path`".into()),
    };
    let ingested = ingest_sources(&manifest, state.fetcher.as_ref(), state.tokenizer.as_ref());
    Ok((ingested.documents, json!(ingested.skips)))
}

pub(super) fn run_pipeline_job(state: Arc<AppState>, id: String, mut sub: PipelineSubmission) {
    let store = &state.store;
    set_status(store, RecordKind::PipelineRun, &id, JobStatus::Running, json!({}));
    let result = pipeline_corpus(&state, &mut sub).and_then(|(docs, skips)| {
        let config = PipelineConfig {
            tokenizer: state.tokenizer.clone(),
            near_dup: sub.near_dup.then(NearDupConfig::default),
            ..PipelineConfig::default()
        };
        let out = run_pipeline(docs, &config).map_err(|e| e.to_string())?;
        if let Some(dir) = &sub.out {
            std::fs::create_dir_all(dir).map_err(|e| e.to_string())?;
            write_corpus(&dir.join("refined.jsonl"), &out.refined).map_err(|e| e.to_string())?;
        }
        store
            .transact(|t| {
                for doc in &out.refined {
                    t.upsert(RecordKind::CorpusDoc, &doc.id, serde_json::to_value(doc).expect("document serializes"))?;
                }
                Ok::<_, crate::store::StoreError>(())
            })
            .map_err(|e| e.to_string())?;
        Ok(json!({
            "report": out.report,
            "skipped": skips,
            "dropped": out.dropped,
            "flagged": out.flagged,
            "refined_count": out.refined.len(),
        }))
    });
    match result {
        Ok(extra) => set_status(store, RecordKind::PipelineRun, &id, JobStatus::Done, extra),
        Err(e) => set_status(store, RecordKind::PipelineRun, &id, JobStatus::Failed, json!({ "error": e })),
    }
}

pub(super) fn enqueue_record(store: &Store, kind: RecordKind, id: &str, request: Value) -> Result<(), crate::store::StoreError> {
    store.insert(kind, id, json!({ "status": JobStatus::Queued, "request": request })).map(|_| ())
}
