use plforge::plan::{checkpoint_decision, compute_plan, CheckpointAction, CheckpointTracker};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::{ensure, Outcome};

const SEQUENCES: usize = 10_000;

/// Steps saved by the policy, derived from the definition alone.
fn oracle(losses: &[f64], interval: u64) -> Vec<u64> {
    (0..losses.len())
        .filter(|&i| {
            let step = i as u64 + 1;
            let strict_min = losses[..i].iter().all(|&earlier| losses[i] < earlier);
            step.is_multiple_of(interval) || strict_min
        })
        .map(|i| i as u64 + 1)
        .collect()
}

pub fn plan_and_checkpoints() -> Outcome {
    let a = compute_plan(32, 8, 8, 3200, 3).map_err(|e| e.to_string())?;
    ensure!(a.effective_batch == 2048, "B_e(32, 8, 8) = {}", a.effective_batch);
    let b = compute_plan(8, 4, 1, 3200, 3).map_err(|e| e.to_string())?;
    ensure!(b.total_steps == 300, "T(3200, 8, 4, 3) = {}", b.total_steps);

    let mut rng = StdRng::seed_from_u64(0x5eed);
    for _ in 0..1000 {
        let (bd, ga, nd) = (rng.random_range(1..64u64), rng.random_range(1..16u64), rng.random_range(1..16u64));
        let (n, e) = (rng.random_range(1..100_000u64), rng.random_range(1..10u64));
        let p = compute_plan(bd, ga, nd, n, e).map_err(|e| e.to_string())?;
        ensure!(p.effective_batch == bd * ga * nd, "effective batch for {bd} {ga} {nd}");
        ensure!(p.total_steps == (n / (bd * ga)) * e, "total steps for {n} {bd} {ga} {e}");
    }

    let mut saves = 0;
    for _ in 0..SEQUENCES {
        let interval = rng.random_range(1..=30u64);
        let len = rng.random_range(1..=300usize);
        // coarse values make ties with the running minimum common
        let losses: Vec<f64> = (0..len).map(|_| f64::from(rng.random_range(0..40u32)) / 10.0).collect();
        let want = oracle(&losses, interval);

        let mut tracker = CheckpointTracker::new(interval);
        for (i, &loss) in losses.iter().enumerate() {
            let d = tracker.observe(loss);
            let stateless = checkpoint_decision(i as u64 + 1, loss, &losses[..i], interval);
            ensure!(d.action == stateless.action, "tracker and decision disagree at step {}", i + 1);
            ensure!(
                (d.action == CheckpointAction::Save) == want.binary_search(&(i as u64 + 1)).is_ok(),
                "step {} with interval {interval}: {:?}",
                i + 1,
                d.action
            );
        }
        ensure!(tracker.saved == want, "saved {:?}, oracle {want:?}", tracker.saved);
        saves += want.len();
    }
    Ok(format!("B_e=2048, T=300, {SEQUENCES} loss sequences ({saves} saves) match the policy"))
}
