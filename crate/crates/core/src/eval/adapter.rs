//! Toolchain adapters: how to compile and run an assembled program, and how
//! to read failures from its output.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::sandbox::{run_sandboxed, SandboxError, SandboxOutcome, SandboxPolicy};
use super::{BenchmarkTask, EvalError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum VerdictClass {
    Passed,
    ParseError,
    CompileError,
    RuntimeError,
    TestFailure,
    Timeout,
    ResourceLimit,
}

impl VerdictClass {
    pub const ALL: [VerdictClass; 7] = [
        Self::Passed,
        Self::ParseError,
        Self::CompileError,
        Self::RuntimeError,
        Self::TestFailure,
        Self::Timeout,
        Self::ResourceLimit,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Passed => "PASSED",
            Self::ParseError => "PARSE_ERROR",
            Self::CompileError => "COMPILE_ERROR",
            Self::RuntimeError => "RUNTIME_ERROR",
            Self::TestFailure => "TEST_FAILURE",
            Self::Timeout => "TIMEOUT",
            Self::ResourceLimit => "RESOURCE_LIMIT",
        }
    }

    /// Human-readable verdict in the style used when reporting samples.
    pub fn label(self) -> &'static str {
        match self {
            Self::Passed => "PASSED",
            Self::ParseError => "FAILED - Parsing Error",
            Self::CompileError => "FAILED - Compilation Error",
            Self::RuntimeError => "FAILED - Runtime Error",
            Self::TestFailure => "FAILED - Does not pass all the test cases",
            Self::Timeout => "FAILED - Timeout",
            Self::ResourceLimit => "FAILED - Resource Limit",
        }
    }
}

impl fmt::Display for VerdictClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VerdictClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|v| v.as_str() == s).ok_or_else(|| format!("unknown verdict class `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierStage {
    Compile,
    Run,
    Any,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ClassifierSpec {
    #[serde(default = "any_stage")]
    stage: ClassifierStage,
    pattern: String,
    verdict: VerdictClass,
}

fn any_stage() -> ClassifierStage {
    ClassifierStage::Any
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct AdapterFile {
    language: String,
    #[serde(default)]
    extension: Option<String>,
    #[serde(default)]
    compile_cmd: Option<String>,
    run_cmd: String,
    #[serde(default)]
    program_template: Option<String>,
    #[serde(default)]
    classifiers: Vec<ClassifierSpec>,
}

#[derive(Debug, Clone)]
pub struct Classifier {
    pub stage: ClassifierStage,
    pub pattern: Regex,
    pub verdict: VerdictClass,
}

pub const DEFAULT_PROGRAM_TEMPLATE: &str = "{prompt}{completion}\n\n{test}\n";

/// Built-in adapter for the bundled test dialect, run by this crate's own
/// binary through its hidden `stub` subcommand.
pub const STUB_ADAPTER_TOML: &str = r#"
language = "stub"
extension = "stub"
compile_cmd = "{self} stub check {file}"
run_cmd = "{self} stub run {file}"
program_template = "{prompt}{completion}\n{test}\n"

[[classifiers]]
stage = "compile"
pattern = "(?m)^parse error"
verdict = "PARSE_ERROR"

[[classifiers]]
stage = "compile"
pattern = "(?m)^compile error"
verdict = "COMPILE_ERROR"

[[classifiers]]
stage = "run"
pattern = "(?m)^assertion failed"
verdict = "TEST_FAILURE"

[[classifiers]]
pattern = "memory allocation of \\d+ bytes failed"
verdict = "RESOURCE_LIMIT"
"#;

#[derive(Debug, Clone)]
pub struct RunnerAdapter {
    pub language: String,
    pub extension: String,
    pub compile_cmd: Option<Vec<String>>,
    pub run_cmd: Vec<String>,
    pub program_template: String,
    pub classifiers: Vec<Classifier>,
    /// Substituted for `{self}` in command templates.
    pub self_exe: Option<PathBuf>,
}

fn split_template(template: &str) -> Result<Vec<String>, EvalError> {
    let parts = shlex::split(template).ok_or_else(|| EvalError::Adapter(format!("cannot parse command `{template}`")))?;
    if parts.is_empty() {
        return Err(EvalError::Adapter("empty command template".into()));
    }
    Ok(parts)
}

impl RunnerAdapter {
    pub fn from_toml(text: &str) -> Result<Self, EvalError> {
        let file: AdapterFile = toml::from_str(text).map_err(|e| EvalError::Adapter(e.to_string()))?;
        if !file.run_cmd.contains("{file}") {
            return Err(EvalError::Adapter("run_cmd must reference the {file} placeholder".into()));
        }
        let classifiers = file
            .classifiers
            .into_iter()
            .map(|c| {
                if c.verdict == VerdictClass::Passed {
                    return Err(EvalError::Adapter("a classifier cannot produce PASSED".into()));
                }
                let pattern = Regex::new(&c.pattern)
                    .map_err(|e| EvalError::Adapter(format!("invalid classifier pattern `{}`: {e}", c.pattern)))?;
                Ok(Classifier { stage: c.stage, pattern, verdict: c.verdict })
            })
            .collect::<Result<_, _>>()?;
        let extension = file.extension.unwrap_or_else(|| file.language.clone());
        Ok(Self {
            compile_cmd: file.compile_cmd.as_deref().map(split_template).transpose()?,
            run_cmd: split_template(&file.run_cmd)?,
            program_template: file.program_template.unwrap_or_else(|| DEFAULT_PROGRAM_TEMPLATE.to_string()),
            language: file.language,
            extension,
            classifiers,
            self_exe: None,
        })
    }

    pub fn load(path: &Path) -> Result<Self, EvalError> {
        let text = std::fs::read_to_string(path).map_err(|e| EvalError::Adapter(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// The bundled dialect adapter, running `exe stub ...`.
    pub fn stub(exe: impl Into<PathBuf>) -> Self {
        let mut a = Self::from_toml(STUB_ADAPTER_TOML).expect("built-in adapter parses");
        a.self_exe = Some(exe.into());
        a
    }

    pub fn with_self_exe(mut self, exe: impl Into<PathBuf>) -> Self {
        self.self_exe = Some(exe.into());
        self
    }

    pub fn assemble(&self, task: &BenchmarkTask, completion: &str) -> String {
        // single pass so placeholder-like text inside the pieces stays literal
        let mut out = String::new();
        let mut rest = self.program_template.as_str();
        while let Some(start) = rest.find('{') {
            out.push_str(&rest[..start]);
            let tail = &rest[start..];
            let replaced = [
                ("{prompt}", task.prompt.as_str()),
                ("{completion}", completion),
                ("{test}", task.test.as_str()),
                ("{entry_point}", task.entry_point.as_str()),
            ]
            .into_iter()
            .find(|(k, _)| tail.starts_with(k));
            match replaced {
                Some((k, v)) => {
                    out.push_str(v);
                    rest = &tail[k.len()..];
                }
                None => {
                    out.push('{');
                    rest = &tail[1..];
                }
            }
        }
        out.push_str(rest);
        out
    }

    fn render(&self, template: &[String], file: &Path, dir: &Path) -> Vec<String> {
        let exe = self
            .self_exe
            .clone()
            .or_else(|| std::env::current_exe().ok())
            .unwrap_or_else(|| PathBuf::from("plforge"));
        template
            .iter()
            .map(|part| {
                part.replace("{file}", &file.to_string_lossy())
                    .replace("{dir}", &dir.to_string_lossy())
                    .replace("{self}", &exe.to_string_lossy())
            })
            .collect()
    }

    pub fn classify(&self, stage: ClassifierStage, output: &str) -> Option<VerdictClass> {
        self.classifiers
            .iter()
            .filter(|c| c.stage == stage || c.stage == ClassifierStage::Any)
            .find(|c| c.pattern.is_match(output))
            .map(|c| c.verdict)
    }
}

/// Result of running one completion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalVerdict {
    pub task_id: String,
    pub sample_index: usize,
    pub class: VerdictClass,
    /// Tail of the failing step's output, truncated.
    pub output: String,
    pub wall_secs: f64,
}

const VERDICT_OUTPUT_CAP: usize = 4096;

fn excerpt(o: &SandboxOutcome) -> String {
    let mut text = o.stderr.clone();
    if !o.stdout.is_empty() {
        if !text.is_empty() {
            text.push('\n');
        }
        text.push_str(&o.stdout);
    }
    if text.len() > VERDICT_OUTPUT_CAP {
        let mut cut = VERDICT_OUTPUT_CAP;
        while !text.is_char_boundary(cut) {
            cut -= 1;
        }
        text.truncate(cut);
        text.push_str("\n[truncated]");
    }
    text
}

fn sandbox_err(e: SandboxError) -> EvalError {
    match e {
        SandboxError::MissingCommand(c) => EvalError::Toolchain(c),
        other => EvalError::Sandbox(other.to_string()),
    }
}

/// Assembles prompt, completion and tests, then compiles and runs the result
/// in a fresh sandbox. The whole execution shares one wall-clock budget.
pub fn execute(
    completion: &str,
    task: &BenchmarkTask,
    sample_index: usize,
    adapter: &RunnerAdapter,
    policy: &SandboxPolicy,
) -> Result<EvalVerdict, EvalError> {
    let started = Instant::now();
    let dir = tempfile::Builder::new()
        .prefix("plforge-exec-")
        .tempdir()
        .map_err(|e| EvalError::Sandbox(format!("scratch directory: {e}")))?;
    let file = dir.path().join(format!("main.{}", adapter.extension));
    std::fs::write(&file, adapter.assemble(task, completion)).map_err(|e| EvalError::Sandbox(e.to_string()))?;

    let verdict = |class: VerdictClass, output: String| EvalVerdict {
        task_id: task.task_id.clone(),
        sample_index,
        class,
        output,
        wall_secs: started.elapsed().as_secs_f64(),
    };
    let limit_class = |o: &SandboxOutcome| {
        if o.timed_out {
            Some(VerdictClass::Timeout)
        } else if o.resource_limited {
            Some(VerdictClass::ResourceLimit)
        } else {
            None
        }
    };

    if let Some(compile) = &adapter.compile_cmd {
        let argv = adapter.render(compile, &file, dir.path());
        let o = run_sandboxed(&argv, dir.path(), policy).map_err(sandbox_err)?;
        if let Some(class) = limit_class(&o) {
            return Ok(verdict(class, excerpt(&o)));
        }
        if !o.success() {
            let text = excerpt(&o);
            let class = adapter.classify(ClassifierStage::Compile, &text).unwrap_or(VerdictClass::CompileError);
            return Ok(verdict(class, text));
        }
    }

    let remaining = policy.timeout_secs - started.elapsed().as_secs_f64();
    if remaining <= 0.0 {
        return Ok(verdict(VerdictClass::Timeout, "time budget spent compiling".into()));
    }
    let run_policy = SandboxPolicy { timeout_secs: remaining, ..policy.clone() };
    let argv = adapter.render(&adapter.run_cmd, &file, dir.path());
    let o = run_sandboxed(&argv, dir.path(), &run_policy).map_err(sandbox_err)?;
    if let Some(class) = limit_class(&o) {
        return Ok(verdict(class, excerpt(&o)));
    }
    if o.success() {
        return Ok(verdict(VerdictClass::Passed, String::new()));
    }
    let text = excerpt(&o);
    let class = adapter.classify(ClassifierStage::Run, &text).unwrap_or(VerdictClass::RuntimeError);
    Ok(verdict(class, text))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn task() -> BenchmarkTask {
        BenchmarkTask {
            task_id: "t/0".into(),
            prompt: "P{completion}".into(),
            canonical_solution: String::new(),
            test: "T".into(),
            entry_point: "f".into(),
        }
    }

    #[test]
    fn stub_adapter_parses() {
        let a = RunnerAdapter::stub("/bin/plforge");
        assert_eq!(a.language, "stub");
        assert_eq!(a.compile_cmd.as_ref().unwrap()[1], "stub");
        assert_eq!(a.classify(ClassifierStage::Compile, "parse error: line 1: x"), Some(VerdictClass::ParseError));
        assert_eq!(a.classify(ClassifierStage::Run, "parse error: line 1: x"), None);
        assert_eq!(a.classify(ClassifierStage::Run, "assertion failed: line 3"), Some(VerdictClass::TestFailure));
    }

    #[test]
    fn assembly_leaves_inner_braces_alone() {
        let a = RunnerAdapter::stub("/bin/plforge");
        assert_eq!(a.assemble(&task(), "C{test}"), "P{completion}C{test}\nT\n");
    }

    #[test]
    fn adapter_validation() {
        assert!(RunnerAdapter::from_toml("language='x'\nrun_cmd='x run'").is_err());
        let bad_re = "language='x'\nrun_cmd='x {file}'\n[[classifiers]]\npattern='('\nverdict='RUNTIME_ERROR'";
        assert!(RunnerAdapter::from_toml(bad_re).is_err());
        let passed = "language='x'\nrun_cmd='x {file}'\n[[classifiers]]\npattern='ok'\nverdict='PASSED'";
        assert!(RunnerAdapter::from_toml(passed).is_err());
        let ok = RunnerAdapter::from_toml("language='x'\nrun_cmd='x \"{file}\"'").unwrap();
        assert_eq!(ok.extension, "x");
        assert!(ok.compile_cmd.is_none());
    }

    #[test]
    fn shipped_mojo_adapter_parses() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../adapters/mojo.toml");
        let a = RunnerAdapter::load(&path).unwrap();
        assert_eq!(a.language, "mojo");
        assert_eq!(
            a.classify(ClassifierStage::Compile, "/x/main.mojo:1:14: error: expected ':' in function definition"),
            Some(VerdictClass::ParseError)
        );
        assert_eq!(
            a.classify(ClassifierStage::Compile, "/x/main.mojo:3:5: error: use of unknown declaration 'foo'"),
            Some(VerdictClass::CompileError)
        );
    }

    #[test]
    fn verdict_names_round_trip() {
        for v in VerdictClass::ALL {
            assert_eq!(v.as_str().parse::<VerdictClass>().unwrap(), v);
            assert_eq!(serde_json::to_string(&v).unwrap(), format!("\"{v}\""));
        }
    }
}
