//! Expert review tasks and their state machine.
//!
//! The tool never decides quality on its own; it only queues work and records
//! what reviewers decided. Legal moves are
//! `pending -> {accepted, rejected, edited}` and `edited -> {accepted, rejected}`.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    SampleTriage,
    PromptRefine,
    TranslationAdjudicate,
    SolutionAuthor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskStatus {
    Pending,
    Accepted,
    Rejected,
    Edited,
}

impl TaskStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, TaskStatus::Accepted | TaskStatus::Rejected)
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "pending" => Some(Self::Pending),
            "accepted" => Some(Self::Accepted),
            "rejected" => Some(Self::Rejected),
            "edited" => Some(Self::Edited),
            _ => None,
        }
    }
}

impl fmt::Display for TaskStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaskStatus::Pending => "pending",
            TaskStatus::Accepted => "accepted",
            TaskStatus::Rejected => "rejected",
            TaskStatus::Edited => "edited",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum ReviewAction {
    Accept,
    Reject,
    Edit { payload: Value },
}

impl ReviewAction {
    fn target(&self) -> TaskStatus {
        match self {
            ReviewAction::Accept => TaskStatus::Accepted,
            ReviewAction::Reject => TaskStatus::Rejected,
            ReviewAction::Edit { .. } => TaskStatus::Edited,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ReviewError {
    #[error("illegal transition {from} -> {to}")]
    IllegalTransition { from: TaskStatus, to: TaskStatus },
    #[error("duplicate task id `{0}`")]
    DuplicateTask(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewTask {
    pub id: String,
    pub kind: TaskKind,
    pub payload: Value,
    pub status: TaskStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict_note: Option<String>,
    /// Payload as first queued, kept once an edit replaces it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub original_payload: Option<Value>,
}

pub fn transition_allowed(from: TaskStatus, to: TaskStatus) -> bool {
    matches!(
        (from, to),
        (TaskStatus::Pending, TaskStatus::Accepted)
            | (TaskStatus::Pending, TaskStatus::Rejected)
            | (TaskStatus::Pending, TaskStatus::Edited)
            | (TaskStatus::Edited, TaskStatus::Accepted)
            | (TaskStatus::Edited, TaskStatus::Rejected)
    )
}

impl ReviewTask {
    pub fn pending(id: impl Into<String>, kind: TaskKind, payload: Value) -> Self {
        Self {
            id: id.into(),
            kind,
            payload,
            status: TaskStatus::Pending,
            verdict_note: None,
            original_payload: None,
        }
    }

    pub fn apply(&mut self, action: ReviewAction, note: Option<String>) -> Result<(), ReviewError> {
        let to = action.target();
        if !transition_allowed(self.status, to) {
            return Err(ReviewError::IllegalTransition { from: self.status, to });
        }
        if let ReviewAction::Edit { payload } = action {
            let previous = std::mem::replace(&mut self.payload, payload);
            self.original_payload.get_or_insert(previous);
        }
        self.status = to;
        if note.is_some() {
            self.verdict_note = note;
        }
        Ok(())
    }

    /// Work created by accepting this task: an accepted sample triage opens a
    /// prompt-refinement task for the same snippet.
    pub fn follow_up(&self) -> Option<ReviewTask> {
        if self.kind != TaskKind::SampleTriage || self.status != TaskStatus::Accepted {
            return None;
        }
        let snippet_id = self.payload.get("snippet_id")?.as_str()?.to_string();
        let payload = json!({
            "snippet_id": snippet_id,
            "code": self.payload.get("source").cloned().unwrap_or(Value::Null),
            "seed_prompt": self.payload.get("seed_prompt").cloned().unwrap_or(Value::Null),
            "variants": [],
        });
        Some(ReviewTask::pending(refine_task_id(&snippet_id), TaskKind::PromptRefine, payload))
    }
}

pub fn triage_task_id(snippet_id: &str) -> String {
    format!("triage:{snippet_id}")
}

pub fn refine_task_id(snippet_id: &str) -> String {
    format!("refine:{snippet_id}")
}
