//! Runs the bundled benchmark through the sandboxed harness with canonical
//! and deliberately wrong completions, then renders a leaderboard.
//!
//! Needs the `plforge` binary: `cargo build && cargo run --example eval_harness`

use std::path::{Path, PathBuf};

use plforge::eval::{
    evaluate_model, load_benchmark, render_leaderboard, BenchmarkTask, CanonicalGenerator, EvalOptions, ModelInfo,
    RunnerAdapter, SandboxPolicy,
};

fn binary() -> PathBuf {
    let exe = std::env::current_exe().expect("current exe");
    // target/<profile>/examples/eval_harness -> target/<profile>/plforge
    exe.parent().and_then(Path::parent).expect("target dir").join("plforge")
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures");
    let tasks = load_benchmark(&root.join("stub_bench.jsonl"))?;
    let adapter = RunnerAdapter::stub(binary());
    let policy = SandboxPolicy { timeout_secs: 2.0, ..SandboxPolicy::default() };
    let options = EvalOptions::default();

    let canonical = evaluate_model(ModelInfo::named("canonical"), &CanonicalGenerator, &tasks, &options, &adapter, &policy)?;
    let off_by_one = |_: &BenchmarkTask, _: usize| -> Result<String, String> { Ok("  (+ 1 a))\n".into()) };
    let wrong = evaluate_model(ModelInfo::named("off-by-one"), &off_by_one, &tasks, &options, &adapter, &policy)?;

    for t in &wrong.tasks {
        for v in &t.samples {
            println!("{:<8} {}", t.task_id, v.class.label());
        }
    }
    print!("{}", render_leaderboard(&[canonical, wrong]).render_table());
    Ok(())
}
