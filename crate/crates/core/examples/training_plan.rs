//! Computes a training plan and replays a loss curve through the checkpoint
//! policy.
//!
//! `cargo run --example training_plan`

use plforge::plan::{compute_plan, CheckpointAction, CheckpointTracker};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let plan = compute_plan(8, 4, 1, 120_000, 3)?;
    println!(
        "effective batch {}, {} steps per epoch, {} total steps",
        plan.effective_batch, plan.steps_per_epoch, plan.total_steps
    );

    let losses = [2.31, 1.92, 1.75, 1.79, 1.61, 1.61, 1.58, 1.66, 1.52, 1.55];
    let mut tracker = CheckpointTracker::new(4);
    for &loss in &losses {
        let d = tracker.observe(loss);
        let mark = if d.action == CheckpointAction::Save { "save" } else { "" };
        println!("step {:>2} loss {loss:.2} {mark} {:?}", d.step, d.reasons);
    }
    println!("saved at {:?}", tracker.saved);
    Ok(())
}
