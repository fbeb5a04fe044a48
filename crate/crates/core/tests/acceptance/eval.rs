use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use plforge::eval::{
    evaluate_model, execute, load_benchmark, pass_at_k, render_leaderboard, validate_benchmark, BenchmarkTask,
    CanonicalGenerator, EvalOptions, EvalReport, ModelInfo, ReportMetadata, RunnerAdapter, SandboxPolicy,
    VerdictClass,
};

use crate::{ensure, Outcome};

const PASSK_TOL: f64 = 1e-12;
const TIMEOUT_SECS: f64 = 1.0;
const TIMEOUT_SLACK: f64 = 0.5;
const HARNESS_BUDGET: Duration = Duration::from_secs(30);

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn adapter() -> RunnerAdapter {
    RunnerAdapter::stub(env!("CARGO_BIN_EXE_plforge"))
}

/// Fraction of k-subsets of n samples, the first c of them correct, that
/// contain a correct sample.
fn enumerate(n: u32, c: u32, k: u32) -> f64 {
    let correct_mask = (1u32 << c) - 1;
    let (mut hit, mut total) = (0u64, 0u64);
    for subset in 0u32..(1 << n) {
        if subset.count_ones() == k {
            total += 1;
            if subset & correct_mask != 0 {
                hit += 1;
            }
        }
    }
    hit as f64 / total as f64
}

pub fn pass_at_k_enumeration() -> Outcome {
    let mut cases = 0;
    for n in 1..=8u32 {
        for c in 0..=n {
            for k in 1..=n {
                let got = pass_at_k(n.into(), c.into(), k.into()).map_err(|e| e.to_string())?;
                let want = enumerate(n, c, k);
                ensure!((got - want).abs() <= PASSK_TOL, "n={n} c={c} k={k}: {got} vs {want}");
                cases += 1;
            }
        }
    }
    let five_sixths = pass_at_k(4, 2, 2).map_err(|e| e.to_string())?;
    ensure!((five_sixths - 5.0 / 6.0).abs() <= PASSK_TOL, "pass@2 with n=4 c=2 is {five_sixths}");
    Ok(format!("{cases} (n, c, k) triples; n=4 c=2 k=2 gives 5/6"))
}

fn report(tasks: &[BenchmarkTask], generator: &dyn plforge::eval::Generator, policy: &SandboxPolicy) -> Result<EvalReport, String> {
    evaluate_model(ModelInfo::named("m"), generator, tasks, &EvalOptions::default(), &adapter(), policy)
        .map_err(|e| e.to_string())
}

pub fn harness_verdicts() -> Outcome {
    let started = Instant::now();
    let tasks = load_benchmark(&fixture("stub_bench.jsonl")).map_err(|e| e.to_string())?;
    let policy = SandboxPolicy { timeout_secs: TIMEOUT_SECS, ..SandboxPolicy::default() };

    let canonical = report(&tasks, &CanonicalGenerator, &policy)?;
    ensure!(canonical.pass_at_1() == Some(1.0), "canonical pass@1 {:?}", canonical.pass_at_1());
    let garbage = |_: &BenchmarkTask, _: usize| -> Result<String, String> { Ok("@@ not ( a program".into()) };
    let garbage = report(&tasks, &garbage, &policy)?;
    ensure!(garbage.pass_at_1() == Some(0.0), "garbage pass@1 {:?}", garbage.pass_at_1());

    let add = &tasks[0];
    let cases = [
        ("  (+ a b)\n", VerdictClass::ParseError),
        ("  (+ a c))\n", VerdictClass::CompileError),
        ("  (/ a 0))\n", VerdictClass::RuntimeError),
        ("  (- a b))\n", VerdictClass::TestFailure),
        ("  (+ a b))\n", VerdictClass::Passed),
    ];
    for (completion, want) in cases {
        let v = execute(completion, add, 0, &adapter(), &policy).map_err(|e| e.to_string())?;
        ensure!(v.class == want, "`{}` classified {} ({}), wanted {want}", completion.trim(), v.class, v.output);
    }
    ensure!(VerdictClass::ParseError.label() == "FAILED - Parsing Error", "parse label");
    ensure!(VerdictClass::CompileError.label() == "FAILED - Compilation Error", "compile label");
    ensure!(VerdictClass::TestFailure.label() == "FAILED - Does not pass all the test cases", "test label");

    let spin = "  (let i 0)\n  (while true (set i (+ i 1)))\n  (+ a b))\n";
    let t = Instant::now();
    let v = execute(spin, add, 0, &adapter(), &policy).map_err(|e| e.to_string())?;
    let wall = t.elapsed().as_secs_f64();
    ensure!(v.class == VerdictClass::Timeout, "infinite loop classified {}", v.class);
    ensure!(wall <= TIMEOUT_SECS + TIMEOUT_SLACK, "timeout verdict after {wall:.3}s");

    let elapsed = started.elapsed();
    ensure!(elapsed < HARNESS_BUDGET, "took {elapsed:?}");
    Ok(format!("canonical 1.0, garbage 0.0, TIMEOUT after {wall:.2}s, parse/compile/runtime/test classes"))
}

pub fn validation_gate() -> Outcome {
    let path = fixture("stub_bench_broken.jsonl");
    let tasks = load_benchmark(&path).map_err(|e| e.to_string())?;
    let report = validate_benchmark(&tasks, &adapter(), &SandboxPolicy::default(), 0).map_err(|e| e.to_string())?;
    let failing: Vec<&str> = report.failures.iter().map(|f| f.task_id.as_str()).collect();
    ensure!(!report.is_valid() && failing == ["Stub/1"], "failures {failing:?}");

    let out = Command::new(env!("CARGO_BIN_EXE_plforge"))
        .args(["eval", "--bench"])
        .arg(&path)
        .args(["--adapter", "stub", "--validate-only"])
        .output()
        .map_err(|e| e.to_string())?;
    let text = format!("{}{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr));
    ensure!(out.status.code() == Some(1), "CLI exited with {:?}", out.status.code());
    ensure!(text.contains("Stub/1"), "CLI output does not name the task: {text}");

    let good = Command::new(env!("CARGO_BIN_EXE_plforge"))
        .args(["eval", "--bench"])
        .arg(fixture("stub_bench.jsonl"))
        .args(["--adapter", "stub", "--validate-only"])
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(good.status.success(), "valid benchmark rejected");
    Ok("Stub/1 rejected by library and CLI (exit 1)".into())
}

const TABLE4: [(&str, &str, &str, f64); 13] = [
    ("Mistral", "Open", "7B", 1.3),
    ("CodeLLaMA", "Open", "7B", 4.7),
    ("CodeGemma", "Open", "7B", 5.1),
    ("MagiCoder", "Open", "7B", 7.3),
    ("WizardCoder", "Open", "34B", 9.2),
    ("Codestral", "Open", "23B", 9.2),
    ("Code-Qwen", "Open", "7B", 9.9),
    ("DeepSeek-Coder", "Open", "33B", 10.2),
    ("GPT-4o", "Close", "--", 25.5),
    ("Mojo-Coder", "Open", "7B", 36.7),
    ("Claude-3.5-Sonnet", "Close", "--", 39.8),
    ("Mojo-Coder-it-m", "Open", "7B", 61.5),
    ("Mojo-Coder-it", "Open", "7B", 66.4),
];

fn synthetic(model: &str, kind: &str, params: &str, percent: f64) -> EvalReport {
    EvalReport {
        model: ModelInfo { id: model.into(), kind: Some(kind.into()), parameters: Some(params.into()) },
        tasks: Vec::new(),
        pass_at_k: BTreeMap::from([(1, percent / 100.0)]),
        metadata: ReportMetadata {
            adapter: "synthetic".into(),
            policy: SandboxPolicy::default(),
            samples_per_task: 1,
            created_unix: 0,
            decoding: None,
        },
    }
}

pub fn leaderboard_ordering() -> Outcome {
    let mut reports: Vec<EvalReport> = TABLE4.iter().map(|(m, k, p, v)| synthetic(m, k, p, *v)).collect();
    reports.reverse();
    reports.rotate_left(5);
    let board = render_leaderboard(&reports);
    let got: Vec<&str> = board.rows.iter().map(|r| r.model.as_str()).collect();

    // rows with equal pass@1 carry no order of their own; the renderer puts
    // them in name order, so the reference is compared group by group
    let mut i = 0;
    while i < TABLE4.len() {
        let j = (i..TABLE4.len()).take_while(|&j| TABLE4[j].3 == TABLE4[i].3).count() + i;
        let mut group: Vec<&str> = TABLE4[i..j].iter().map(|r| r.0).collect();
        group.sort_unstable();
        ensure!(got[i..j] == group[..], "rows {i}..{j}: {:?}, wanted {group:?}", &got[i..j]);
        i = j;
    }

    let table = board.render_table();
    let body: Vec<&str> = table.lines().skip(2).collect();
    for (line, row) in body.iter().zip(&board.rows) {
        let want = TABLE4.iter().find(|r| r.0 == row.model).expect("known model");
        ensure!(line.trim_end().ends_with(&format!("{:.1}", want.3)), "row `{line}`");
        ensure!(line.contains(want.1) && line.contains(want.2), "row `{line}`");
    }
    let strict: Vec<&str> = TABLE4.iter().map(|r| r.0).collect();
    let differs: Vec<usize> = (0..strict.len()).filter(|&i| strict[i] != got[i]).collect();
    Ok(format!(
        "13 rows in ascending pass@1 from shuffled input; tied 9.2% rows by name (positions {differs:?} swap against the printed table)"
    ))
}
