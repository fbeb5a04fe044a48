use std::collections::BTreeMap;
use std::io::Write;
use std::process::{Command, Stdio};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adapter::{execute, EvalVerdict, RunnerAdapter, VerdictClass};
use super::passk::pass_at_k;
use super::sandbox::SandboxPolicy;
use super::{BenchmarkTask, EvalError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub total: usize,
    pub valid: usize,
    pub failures: Vec<EvalVerdict>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn summary(&self) -> String {
        let mut s = format!("{}/{} valid", self.valid, self.total);
        for f in &self.failures {
            s.push_str(&format!("\n  {}: {}", f.task_id, f.class.label()));
        }
        s
    }
}

/// Runs every canonical solution against its own tests.
pub fn validate_benchmark(
    tasks: &[BenchmarkTask],
    adapter: &RunnerAdapter,
    policy: &SandboxPolicy,
    workers: usize,
) -> Result<ValidationReport, EvalError> {
    let run = || -> Result<Vec<EvalVerdict>, EvalError> {
        tasks.par_iter().map(|t| execute(&t.canonical_solution, t, 0, adapter, policy)).collect()
    };
    let verdicts = in_pool(workers, run)?;
    let failures: Vec<EvalVerdict> = verdicts.into_iter().filter(|v| v.class != VerdictClass::Passed).collect();
    Ok(ValidationReport { total: tasks.len(), valid: tasks.len() - failures.len(), failures })
}

fn in_pool<T: Send>(workers: usize, f: impl FnOnce() -> Result<T, EvalError> + Send) -> Result<T, EvalError> {
    if workers == 0 {
        return f();
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| EvalError::Sandbox(e.to_string()))?
        .install(f)
}

/// Produces completions for benchmark prompts.
pub trait Generator: Send + Sync {
    fn generate(&self, task: &BenchmarkTask, sample_index: usize) -> Result<String, String>;
}

impl<F> Generator for F
where
    F: Fn(&BenchmarkTask, usize) -> Result<String, String> + Send + Sync,
{
    fn generate(&self, task: &BenchmarkTask, sample_index: usize) -> Result<String, String> {
        self(task, sample_index)
    }
}

/// Emits each task's canonical solution.
#[derive(Debug, Clone, Copy, Default)]
pub struct CanonicalGenerator;

impl Generator for CanonicalGenerator {
    fn generate(&self, task: &BenchmarkTask, _: usize) -> Result<String, String> {
        Ok(task.canonical_solution.clone())
    }
}

/// Runs an external command per sample: the prompt goes to stdin, the
/// completion is read from stdout. `PLFORGE_TASK_ID`, `PLFORGE_ENTRY_POINT`
/// and `PLFORGE_SAMPLE` are set in its environment.
#[derive(Debug, Clone)]
pub struct CommandGenerator {
    argv: Vec<String>,
}

impl CommandGenerator {
    pub fn new(command: &str) -> Result<Self, EvalError> {
        match shlex::split(command) {
            Some(argv) if !argv.is_empty() => Ok(Self { argv }),
            _ => Err(EvalError::Argument(format!("cannot parse generator command `{command}`"))),
        }
    }
}

impl Generator for CommandGenerator {
    fn generate(&self, task: &BenchmarkTask, sample_index: usize) -> Result<String, String> {
        let mut child = Command::new(&self.argv[0])
            .args(&self.argv[1..])
            .env("PLFORGE_TASK_ID", &task.task_id)
            .env("PLFORGE_ENTRY_POINT", &task.entry_point)
            .env("PLFORGE_SAMPLE", sample_index.to_string())
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| format!("{}: {e}", self.argv[0]))?;
        let mut stdin = child.stdin.take().expect("piped");
        let prompt = task.prompt.clone();
        let writer = std::thread::spawn(move || stdin.write_all(prompt.as_bytes()));
        let out = child.wait_with_output().map_err(|e| e.to_string())?;
        let _ = writer.join();
        if !out.status.success() {
            return Err(format!(
                "generator exited with {}: {}",
                out.status,
                String::from_utf8_lossy(&out.stderr).trim()
            ));
        }
        String::from_utf8(out.stdout).map_err(|_| "generator output is not UTF-8".to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ModelInfo {
    pub id: String,
    /// "Open" or "Close" weights.
    #[serde(default)]
    pub kind: Option<String>,
    #[serde(default)]
    pub parameters: Option<String>,
}

impl ModelInfo {
    pub fn named(id: &str) -> Self {
        Self { id: id.to_string(), ..Default::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskResult {
    pub task_id: String,
    pub samples: Vec<EvalVerdict>,
    pub correct: u64,
    /// Set when the generator failed; the task then counts as zero correct.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub adapter: String,
    pub policy: SandboxPolicy,
    pub samples_per_task: u64,
    pub created_unix: u64,
    #[serde(default)]
    pub decoding: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: ModelInfo,
    pub tasks: Vec<TaskResult>,
    /// k -> mean per-task pass@k.
    pub pass_at_k: BTreeMap<u64, f64>,
    pub metadata: ReportMetadata,
}

impl EvalReport {
    pub fn pass_at_1(&self) -> Option<f64> {
        self.pass_at_k.get(&1).copied()
    }

    pub fn verdict_counts(&self) -> BTreeMap<VerdictClass, usize> {
        let mut counts = BTreeMap::new();
        for v in self.tasks.iter().flat_map(|t| &t.samples) {
            *counts.entry(v.class).or_insert(0) += 1;
        }
        counts
    }

    pub fn render_table(&self) -> String {
        let mut out = format!("model: {}\n", self.model.id);
        for (k, v) in &self.pass_at_k {
            out.push_str(&format!("pass@{k}: {:.1}%\n", v * 100.0));
        }
        for (class, n) in self.verdict_counts() {
            out.push_str(&format!("  {:<16} {n}\n", class.as_str()));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub samples: u64,
    pub ks: Vec<u64>,
    pub workers: usize,
    /// Abort on the first generator failure instead of scoring the task zero.
    pub strict: bool,
    pub decoding: Option<String>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { samples: 1, ks: vec![1], workers: 0, strict: false, decoding: None }
    }
}

/// Mean of per-task pass@k, summed in task-id order so the result does not
/// depend on task order.
pub fn aggregate_pass_at_k(tasks: &[TaskResult], n: u64, k: u64) -> Result<f64, EvalError> {
    if tasks.is_empty() {
        return Err(EvalError::NoTasks);
    }
    let mut per_task: Vec<(&str, f64)> = tasks
        .iter()
        .map(|t| pass_at_k(n, t.correct, k).map(|p| (t.task_id.as_str(), p)))
        .collect::<Result<_, _>>()
        .map_err(|e| EvalError::Argument(e.to_string()))?;
    per_task.sort_by(|a, b| a.0.cmp(b.0));
    Ok(per_task.iter().map(|(_, p)| p).sum::<f64>() / tasks.len() as f64)
}

enum Sample {
    Verdict(EvalVerdict),
    GeneratorFailed(String),
}

/// Generates `options.samples` completions per task, executes each in the
/// sandbox and aggregates pass@k for every requested k.
pub fn evaluate_model(
    model: ModelInfo,
    generator: &dyn Generator,
    tasks: &[BenchmarkTask],
    options: &EvalOptions,
    adapter: &RunnerAdapter,
    policy: &SandboxPolicy,
) -> Result<EvalReport, EvalError> {
    let n = options.samples;
    if n == 0 {
        return Err(EvalError::Argument("samples must be at least 1".into()));
    }
    if tasks.is_empty() {
        return Err(EvalError::NoTasks);
    }
    if let Some(&k) = options.ks.iter().find(|&&k| k == 0 || k > n) {
        return Err(EvalError::Argument(format!("k={k} needs 1 <= k <= samples ({n})")));
    }
    policy.validate().map_err(|e| EvalError::Sandbox(e.to_string()))?;

    let jobs: Vec<(usize, u64)> = (0..tasks.len()).flat_map(|t| (0..n).map(move |s| (t, s))).collect();
    let run = || -> Result<Vec<Sample>, EvalError> {
        jobs.par_iter()
            .map(|&(t, s)| {
                let task = &tasks[t];
                match generator.generate(task, s as usize) {
                    Ok(completion) => execute(&completion, task, s as usize, adapter, policy).map(Sample::Verdict),
                    Err(e) if options.strict => Err(EvalError::Generator { task_id: task.task_id.clone(), message: e }),
                    Err(e) => Ok(Sample::GeneratorFailed(e)),
                }
            })
            .collect()
    };
    let samples = in_pool(options.workers, run)?;

    let mut results: Vec<TaskResult> = tasks
        .iter()
        .map(|t| TaskResult { task_id: t.task_id.clone(), samples: Vec::new(), correct: 0, generator_error: None })
        .collect();
    for ((t, _), sample) in jobs.iter().zip(samples) {
        let r = &mut results[*t];
        match sample {
            Sample::Verdict(v) => r.samples.push(v),
            Sample::GeneratorFailed(e) => {
                tracing::warn!(task = r.task_id, "generator failed: {e}");
                r.generator_error.get_or_insert(e);
            }
        }
    }
    for r in &mut results {
        r.correct = if r.generator_error.is_some() {
            0
        } else {
            r.samples.iter().filter(|v| v.class == VerdictClass::Passed).count() as u64
        };
    }

    let mut pass = BTreeMap::new();
    for &k in &options.ks {
        pass.insert(k, aggregate_pass_at_k(&results, n, k)?);
    }
    let created_unix =
        std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    Ok(EvalReport {
        model,
        tasks: results,
        pass_at_k: pass,
        metadata: ReportMetadata {
            adapter: adapter.language.clone(),
            policy: policy.clone(),
            samples_per_task: n,
            created_unix,
            decoding: options.decoding.clone(),
        },
    })
}
