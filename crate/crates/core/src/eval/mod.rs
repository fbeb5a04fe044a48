//! Execution-based benchmark evaluation: task loading, sandboxed runs,
//! failure classification and pass@k reporting.

mod adapter;
pub mod dialect;
mod harness;
mod leaderboard;
mod passk;
mod sandbox;

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adapter::{
    execute, Classifier, ClassifierStage, EvalVerdict, RunnerAdapter, VerdictClass, DEFAULT_PROGRAM_TEMPLATE,
    STUB_ADAPTER_TOML,
};
pub use harness::{
    aggregate_pass_at_k, evaluate_model, validate_benchmark, CanonicalGenerator, CommandGenerator, EvalOptions,
    EvalReport, Generator, ModelInfo, ReportMetadata, TaskResult, ValidationReport,
};
pub use leaderboard::{render_leaderboard, Leaderboard, LeaderboardRow};
pub use passk::{pass_at_k, PassAtKError};
pub use sandbox::{
    run_sandboxed, SandboxError, SandboxOutcome, SandboxPolicy, DEFAULT_MEMORY_BYTES, DEFAULT_TIMEOUT_SECS,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("duplicate task_id `{0}`")]
    DuplicateTask(String),
    #[error("no tasks")]
    NoTasks,
    #[error("task `{task_id}`: prompt does not mention entry point `{entry_point}`")]
    EntryPoint { task_id: String, entry_point: String },
    #[error("adapter: {0}")]
    Adapter(String),
    #[error("toolchain not available: `{0}` not found")]
    Toolchain(String),
    #[error("sandbox: {0}")]
    Sandbox(String),
    #[error("generator failed on `{task_id}`: {message}")]
    Generator { task_id: String, message: String },
    #[error("{0}")]
    Argument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One benchmark problem in the usual line-delimited layout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkTask {
    pub task_id: String,
    /// Signature plus docstring; the completion continues it.
    pub prompt: String,
    pub canonical_solution: String,
    /// Test program appended after the completion.
    pub test: String,
    pub entry_point: String,
}

pub fn parse_benchmark(text: &str) -> Result<Vec<BenchmarkTask>, EvalError> {
    let mut tasks = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let task: BenchmarkTask =
            serde_json::from_str(line).map_err(|e| EvalError::Malformed { line: i + 1, message: e.to_string() })?;
        if !seen.insert(task.task_id.clone()) {
            return Err(EvalError::DuplicateTask(task.task_id));
        }
        if task.entry_point.is_empty() || !task.prompt.contains(&task.entry_point) {
            return Err(EvalError::EntryPoint { task_id: task.task_id, entry_point: task.entry_point });
        }
        tasks.push(task);
    }
    if tasks.is_empty() {
        return Err(EvalError::NoTasks);
    }
    Ok(tasks)
}

pub fn load_benchmark(path: &Path) -> Result<Vec<BenchmarkTask>, EvalError> {
    let text = std::fs::read_to_string(path)?;
    let tasks = parse_benchmark(&text)?;
    tracing::info!(path = %path.display(), count = tasks.len(), "loaded benchmark");
    Ok(tasks)
}

pub fn write_benchmark(path: &Path, tasks: &[BenchmarkTask]) -> std::io::Result<()> {
    let mut text = String::new();
    for t in tasks {
        text.push_str(&serde_json::to_string(t).expect("task serializes"));
        text.push('\n');
    }
    std::fs::write(path, text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(id: &str, prompt: &str, entry: &str) -> String {
        serde_json::json!({"task_id": id, "prompt": prompt, "canonical_solution": "x", "test": "t", "entry_point": entry})
            .to_string()
    }

    #[test]
    fn load_errors() {
        assert!(matches!(parse_benchmark("\n\n"), Err(EvalError::NoTasks)));
        let dup = format!("{}\n{}", line("a", "(def (f", "f"), line("a", "(def (f", "f"));
        match parse_benchmark(&dup) {
            Err(EvalError::DuplicateTask(id)) => assert_eq!(id, "a"),
            other => panic!("{other:?}"),
        }
        let bad = format!("{}\n{{not json", line("a", "(def (f", "f"));
        assert!(matches!(parse_benchmark(&bad), Err(EvalError::Malformed { line: 2, .. })));
        assert!(matches!(parse_benchmark(&line("a", "(def (g", "h")), Err(EvalError::EntryPoint { .. })));
        assert_eq!(parse_benchmark(&line("a", "(def (f", "f")).unwrap().len(), 1);
    }
}
