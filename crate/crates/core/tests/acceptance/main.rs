//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

mod corpus;
mod eval;
mod plan;
mod sft;
mod translate;

use std::panic::AssertUnwindSafe;
use std::time::Instant;

pub type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

#[macro_export]
macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let held: bool = $cond;
        if !held {
            return Err(format!($($msg)+));
        }
    };
}

fn main() {
    let criteria: &[Criterion] = &[
        ("filter pipeline on the 50-document fixture", corpus::pipeline_fixture),
        ("F4 repetition boundaries", corpus::repetition_boundaries),
        ("dedup idempotence and order preservation", corpus::dedup_properties),
        ("token gate truth table", sft::token_gate_table),
        ("rank_repos against a sort oracle", sft::rank_repos_oracle),
        ("BERTScore example, symmetry and self-similarity", translate::bertscore_properties),
        ("candidate selection end to end with stub clients", translate::selection_end_to_end),
        ("pass@k against subset enumeration", eval::pass_at_k_enumeration),
        ("harness verdicts with the stub adapter", eval::harness_verdicts),
        ("benchmark validation gate", eval::validation_gate),
        ("training plan and checkpoint policy", plan::plan_and_checkpoints),
        ("leaderboard ordering", eval::leaderboard_ordering),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let started = Instant::now();
        let outcome = std::panic::catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|p| {
                let msg = p
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                Err(format!("panicked: {msg}"))
            });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail} [{secs:.2}s]"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why} [{secs:.2}s]");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
