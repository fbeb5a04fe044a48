//! HTTP API over the record store: the review queue, translation
//! adjudication, evaluation submissions and pipeline runs.
//!
//! Responses are JSON unless the request prefers `text/plain`, in which case
//! reports come back as rendered tables. When a token is configured every
//! request needs `Authorization: Bearer <token>`.

mod jobs;

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::{Path, Query, Request, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::corpus::{Fetcher, NoFetcher, PipelineReport};
use crate::eval::{EvalReport, RunnerAdapter, SandboxPolicy};
use crate::review::{TaskKind, TaskStatus};
use crate::store::{RecordKind, Store, StoreError};
use crate::text::{Tokenizer, WhitespaceTokenizer};
use crate::translate::TargetLanguage;
use crate::workflow::{self, WorkflowError};

pub use jobs::{EvalSubmission, JobStatus, PipelineSubmission};

pub const TOKEN_ENV: &str = "PLFORGE_API_TOKEN";

pub struct AppState {
    pub store: Arc<Store>,
    /// Bearer token required on every request, if set.
    pub token: Option<String>,
    pub adapter: RunnerAdapter,
    pub policy: SandboxPolicy,
    pub tokenizer: Arc<dyn Tokenizer>,
    pub fetcher: Arc<dyn Fetcher>,
}

impl AppState {
    pub fn new(store: Arc<Store>, adapter: RunnerAdapter) -> Self {
        Self {
            store,
            token: None,
            adapter,
            policy: SandboxPolicy::default(),
            tokenizer: Arc::new(WhitespaceTokenizer),
            fetcher: Arc::new(NoFetcher),
        }
    }
}

#[derive(Debug)]
pub enum ApiError {
    NotFound(String),
    Conflict(String),
    Unprocessable(String),
    BadRequest(String),
    Unauthorized,
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, kind, reason) = match self {
            ApiError::NotFound(r) => (StatusCode::NOT_FOUND, "not_found", r),
            ApiError::Conflict(r) => (StatusCode::CONFLICT, "conflict", r),
            ApiError::Unprocessable(r) => (StatusCode::UNPROCESSABLE_ENTITY, "unprocessable", r),
            ApiError::BadRequest(r) => (StatusCode::BAD_REQUEST, "bad_request", r),
            ApiError::Unauthorized => (StatusCode::UNAUTHORIZED, "unauthorized", "missing or wrong bearer token".into()),
            ApiError::Internal(r) => (StatusCode::INTERNAL_SERVER_ERROR, "internal", r),
        };
        (status, Json(json!({ "error": kind, "reason": reason }))).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::NotFound { .. } => ApiError::NotFound(e.to_string()),
            StoreError::Conflict { .. } | StoreError::Exists { .. } => ApiError::Conflict(e.to_string()),
            _ => ApiError::Internal(e.to_string()),
        }
    }
}

impl From<WorkflowError> for ApiError {
    fn from(e: WorkflowError) -> Self {
        match e {
            WorkflowError::Store(s) => s.into(),
            WorkflowError::Transition(_) | WorkflowError::Invalid(_) => ApiError::Unprocessable(e.to_string()),
            WorkflowError::Decode { .. } => ApiError::Internal(e.to_string()),
        }
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn wants_text(headers: &HeaderMap) -> bool {
    let accept = headers.get(header::ACCEPT).and_then(|v| v.to_str().ok()).unwrap_or("");
    match (accept.find("text/plain"), accept.find("application/json")) {
        (Some(t), Some(j)) => t < j,
        (Some(_), None) => true,
        _ => false,
    }
}

fn text(body: String) -> Response {
    ([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], body).into_response()
}

async fn auth(State(state): State<Arc<AppState>>, req: Request, next: Next) -> Response {
    if let Some(token) = &state.token {
        let given = req.headers().get(header::AUTHORIZATION).and_then(|v| v.to_str().ok());
        if given.and_then(|g| g.strip_prefix("Bearer ")) != Some(token.as_str()) {
            return ApiError::Unauthorized.into_response();
        }
    }
    next.run(req).await
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/review-tasks", get(list_tasks))
        .route("/review-tasks/{id}", get(get_task))
        .route("/review-tasks/{id}/verdict", post(post_verdict))
        .route("/review-tasks/{id}/edit", post(post_edit))
        .route("/eval/submissions", post(post_eval))
        .route("/eval/reports/{id}", get(get_eval))
        .route("/pipeline/runs", post(post_pipeline))
        .route("/pipeline/runs/{id}", get(get_pipeline))
        .route("/pipeline/runs/{id}/report", get(get_pipeline))
        .route("/translations/{prompt_id}/candidates", get(get_candidates))
        .route("/translations/{prompt_id}/adjudicate", post(post_adjudicate))
        .layer(middleware::from_fn_with_state(state.clone(), auth))
        .with_state(state)
}

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(state: Arc<AppState>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "serving");
    axum::serve(listener, router(state)).await
}

#[derive(Debug, Deserialize)]
struct TaskFilter {
    status: Option<String>,
    kind: Option<String>,
}

async fn list_tasks(
    State(state): State<Arc<AppState>>,
    Query(filter): Query<TaskFilter>,
    headers: HeaderMap,
) -> ApiResult<Response> {
    let status = match filter.status.as_deref() {
        Some(s) => Some(TaskStatus::parse(s).ok_or_else(|| ApiError::BadRequest(format!("unknown status `{s}`")))?),
        None => None,
    };
    let kind = match filter.kind.as_deref() {
        Some(k) => Some(
            serde_json::from_value::<TaskKind>(json!(k))
                .map_err(|_| ApiError::BadRequest(format!("unknown kind `{k}`")))?,
        ),
        None => None,
    };
    let all = workflow::list_tasks(&state.store, None, kind)?;
    let mut counts: BTreeMap<String, usize> =
        ["pending", "accepted", "rejected", "edited"].iter().map(|s| (s.to_string(), 0)).collect();
    for t in &all {
        *counts.entry(t.task.status.to_string()).or_default() += 1;
    }
    let tasks: Vec<_> = all.into_iter().filter(|t| status.is_none_or(|s| t.task.status == s)).collect();
    if wants_text(&headers) {
        let mut out = format!("{:<40}  {:<22}  {:<9}  {}\n", "ID", "KIND", "STATUS", "VERSION");
        for t in &tasks {
            let kind = serde_json::to_value(t.task.kind).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
            out.push_str(&format!("{:<40}  {:<22}  {:<9}  {}\n", t.task.id, kind, t.task.status.to_string(), t.version));
        }
        return Ok(text(out));
    }
    Ok(Json(json!({ "tasks": tasks, "counts": counts })).into_response())
}

async fn get_task(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(workflow::get_task(&state.store, &id)?).into_response())
}

#[derive(Debug, Deserialize)]
struct VerdictBody {
    version: u64,
    action: String,
    #[serde(default)]
    note: Option<String>,
}

async fn post_verdict(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(body): Json<VerdictBody>,
) -> ApiResult<Response> {
    let accept = match body.action.as_str() {
        "accept" => true,
        "reject" => false,
        "edit" => return Err(ApiError::Unprocessable("edits go through /review-tasks/{id}/edit".into())),
        other => return Err(ApiError::BadRequest(format!("unknown action `{other}`"))),
    };
    let (task, follow_up) = workflow::submit_verdict(&state.store, &id, body.version, accept, body.note)?;
    Ok(Json(json!({ "task": task, "follow_up": follow_up })).into_response())
}

#[derive(Debug, Deserialize)]
struct EditBody {
    version: u64,
    payload: Value,
    #[serde(default)]
    note: Option<String>,
}

async fn post_edit(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(body): Json<EditBody>,
) -> ApiResult<Response> {
    let task = workflow::submit_edit(&state.store, &id, body.version, body.payload, body.note)?;
    Ok(Json(task).into_response())
}

async fn post_eval(State(state): State<Arc<AppState>>, Json(body): Json<Value>) -> ApiResult<Response> {
    let sub: EvalSubmission = serde_json::from_value(body.clone()).map_err(|e| ApiError::BadRequest(e.to_string()))?;
    let tasks = jobs::submission_tasks(&sub).map_err(ApiError::Unprocessable)?;
    if sub.samples == 0 || sub.ks.iter().any(|&k| k == 0 || k > sub.samples) {
        return Err(ApiError::Unprocessable(format!("need 1 <= k <= samples ({})", sub.samples)));
    }
    let id = jobs::new_job_id("eval");
    jobs::enqueue_record(&state.store, RecordKind::EvalReport, &id, body)?;
    let job_state = state.clone();
    let job_id = id.clone();
    tokio::task::spawn_blocking(move || jobs::run_eval(job_state, job_id, sub, tasks));
    Ok((StatusCode::ACCEPTED, Json(json!({ "id": id, "status": JobStatus::Queued }))).into_response())
}

fn job_view(state: &AppState, kind: RecordKind, id: &str) -> ApiResult<Value> {
    let r = state.store.get(kind, id).ok_or_else(|| ApiError::NotFound(format!("{kind} `{id}` not found")))?;
    let mut view = r.payload;
    if let Some(obj) = view.as_object_mut() {
        obj.remove("request");
        obj.insert("id".into(), json!(id));
        obj.insert("version".into(), json!(r.version));
    }
    Ok(view)
}

async fn get_eval(State(state): State<Arc<AppState>>, Path(id): Path<String>, headers: HeaderMap) -> ApiResult<Response> {
    let view = job_view(&state, RecordKind::EvalReport, &id)?;
    if wants_text(&headers) {
        if let Some(report) = view.get("report") {
            let report: EvalReport = serde_json::from_value(report.clone()).map_err(|e| ApiError::Internal(e.to_string()))?;
            return Ok(text(report.render_table()));
        }
        return Ok(text(format!("{id}: {}\n", view["status"].as_str().unwrap_or("unknown"))));
    }
    Ok(Json(view).into_response())
}

async fn post_pipeline(State(state): State<Arc<AppState>>, Json(body): Json<Value>) -> ApiResult<Response> {
    let sub: PipelineSubmission = serde_json::from_value(body.clone()).map_err(|e| ApiError::BadRequest(e.to_string()))?;
    if sub.documents.is_none() && sub.manifest.is_none() && sub.manifest_path.is_none() {
        return Err(ApiError::Unprocessable("submission needs `documents`, `manifest` or `manifest_path`".into()));
    }
    let id = jobs::new_job_id("run");
    jobs::enqueue_record(&state.store, RecordKind::PipelineRun, &id, body)?;
    let job_state = state.clone();
    let job_id = id.clone();
    tokio::task::spawn_blocking(move || jobs::run_pipeline_job(job_state, job_id, sub));
    Ok((StatusCode::ACCEPTED, Json(json!({ "id": id, "status": JobStatus::Queued }))).into_response())
}

async fn get_pipeline(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> ApiResult<Response> {
    let view = job_view(&state, RecordKind::PipelineRun, &id)?;
    if wants_text(&headers) {
        if let Some(report) = view.get("report") {
            let report: PipelineReport =
                serde_json::from_value(report.clone()).map_err(|e| ApiError::Internal(e.to_string()))?;
            return Ok(text(report.render_table()));
        }
        return Ok(text(format!("{id}: {}\n", view["status"].as_str().unwrap_or("unknown"))));
    }
    Ok(Json(view).into_response())
}

async fn get_candidates(State(state): State<Arc<AppState>>, Path(prompt_id): Path<String>) -> ApiResult<Response> {
    let pools = workflow::pools_for(&state.store, &prompt_id)?;
    if pools.is_empty() {
        return Err(ApiError::NotFound(format!("no translation pools for `{prompt_id}`")));
    }
    let pools: Vec<Value> = pools
        .iter()
        .map(|p| {
            let mut v = serde_json::to_value(p).expect("pool serializes");
            v["effective_winner"] = json!(p.effective_winner());
            v
        })
        .collect();
    Ok(Json(json!({ "prompt_id": prompt_id, "pools": pools })).into_response())
}

#[derive(Debug, Deserialize)]
struct AdjudicateBody {
    version: u64,
    language: TargetLanguage,
    index: usize,
    #[serde(default)]
    note: Option<String>,
}

async fn post_adjudicate(
    State(state): State<Arc<AppState>>,
    Path(prompt_id): Path<String>,
    Json(body): Json<AdjudicateBody>,
) -> ApiResult<Response> {
    let pool = workflow::adjudicate(&state.store, &prompt_id, body.language, body.version, body.index, body.note)?;
    let mut v = serde_json::to_value(&pool).expect("pool serializes");
    v["effective_winner"] = json!(pool.effective_winner());
    Ok(Json(v).into_response())
}
