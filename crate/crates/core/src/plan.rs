//! Training-run arithmetic, the checkpoint policy and the ablation grid.
//!
//! Nothing here trains a model; these are the numbers a run would be
//! configured with.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_SAVE_INTERVAL: u64 = 250;

/// Pretraining token budgets of the ablation grid.
pub const TOKEN_AXIS: [u64; 7] = [0, 1_000_000, 2_000_000, 3_000_000, 4_000_000, 5_000_000, 6_000_000];
/// Instruction counts of the ablation grid.
pub const INSTRUCTION_AXIS: [u64; 8] = [0, 500, 1000, 1500, 2000, 2500, 3000, 3200];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("{0} must be at least 1")]
    NonPositive(&'static str),
    #[error("arithmetic overflow computing {0}")]
    Overflow(&'static str),
    #[error("{0} axis is empty")]
    EmptyAxis(&'static str),
    #[error("{axis} axis repeats value {value}")]
    DuplicateAxisValue { axis: &'static str, value: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingPlan {
    pub per_device_batch: u64,
    pub grad_accum: u64,
    pub devices: u64,
    pub samples: u64,
    pub epochs: u64,
    pub save_interval: u64,
    /// `per_device_batch * grad_accum * devices`
    pub effective_batch: u64,
    /// `samples / effective_batch`, floored.
    pub steps_per_epoch: u64,
    /// `samples / (per_device_batch * grad_accum)` floored, times epochs.
    pub total_steps: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

pub fn compute_plan(
    per_device_batch: u64,
    grad_accum: u64,
    devices: u64,
    samples: u64,
    epochs: u64,
) -> Result<TrainingPlan, PlanError> {
    for (name, v) in [
        ("per-device batch", per_device_batch),
        ("gradient accumulation", grad_accum),
        ("device count", devices),
        ("sample count", samples),
        ("epochs", epochs),
    ] {
        if v == 0 {
            return Err(PlanError::NonPositive(name));
        }
    }
    let accum_batch = per_device_batch.checked_mul(grad_accum).ok_or(PlanError::Overflow("batch size"))?;
    let effective_batch = accum_batch.checked_mul(devices).ok_or(PlanError::Overflow("effective batch"))?;
    let total_steps = (samples / accum_batch).checked_mul(epochs).ok_or(PlanError::Overflow("total steps"))?;
    let mut warnings = Vec::new();
    if total_steps == 0 {
        warnings.push(format!("{samples} samples do not fill one batch of {accum_batch}; no optimizer steps"));
    }
    Ok(TrainingPlan {
        per_device_batch,
        grad_accum,
        devices,
        samples,
        epochs,
        save_interval: DEFAULT_SAVE_INTERVAL,
        effective_batch,
        steps_per_epoch: samples / effective_batch,
        total_steps,
        warnings,
    })
}

impl fmt::Display for TrainingPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "per-device batch     {}", self.per_device_batch)?;
        writeln!(f, "grad accumulation    {}", self.grad_accum)?;
        writeln!(f, "devices              {}", self.devices)?;
        writeln!(f, "samples              {}", self.samples)?;
        writeln!(f, "epochs               {}", self.epochs)?;
        writeln!(f, "effective batch      {}", self.effective_batch)?;
        writeln!(f, "steps per epoch      {}", self.steps_per_epoch)?;
        writeln!(f, "total steps          {}", self.total_steps)?;
        writeln!(f, "save interval        {}", self.save_interval)?;
        for w in &self.warnings {
            writeln!(f, "warning: {w}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckpointAction {
    Save,
    Skip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SaveReason {
    Interval,
    NewMinimum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointDecision {
    pub step: u64,
    pub loss: f64,
    /// Lowest loss seen up to and including this step.
    pub running_min: f64,
    pub action: CheckpointAction,
    pub reasons: Vec<SaveReason>,
}

/// Decides whether step `step` (1-based) with evaluation loss `loss` is
/// saved, given the losses of all earlier steps.
///
/// Saves at every multiple of `interval` and whenever the loss is strictly
/// below everything before it. Both reasons are recorded when both hold.
pub fn checkpoint_decision(step: u64, loss: f64, history: &[f64], interval: u64) -> CheckpointDecision {
    let prior_min = history.iter().copied().filter(|l| !l.is_nan()).fold(f64::INFINITY, f64::min);
    let mut reasons = Vec::new();
    if interval > 0 && step.is_multiple_of(interval) {
        reasons.push(SaveReason::Interval);
    }
    if loss < prior_min {
        reasons.push(SaveReason::NewMinimum);
    }
    CheckpointDecision {
        step,
        loss,
        running_min: if loss < prior_min { loss } else { prior_min },
        action: if reasons.is_empty() { CheckpointAction::Skip } else { CheckpointAction::Save },
        reasons,
    }
}

/// Applies the checkpoint policy step by step, keeping a pointer to the
/// best checkpoint saved so far.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointTracker {
    pub interval: u64,
    pub step: u64,
    pub running_min: f64,
    /// Step of the saved checkpoint with the lowest loss.
    pub best_step: Option<u64>,
    pub saved: Vec<u64>,
}

impl CheckpointTracker {
    pub fn new(interval: u64) -> Self {
        Self { interval, step: 0, running_min: f64::INFINITY, best_step: None, saved: Vec::new() }
    }

    pub fn observe(&mut self, loss: f64) -> CheckpointDecision {
        self.step += 1;
        let mut reasons = Vec::new();
        if self.interval > 0 && self.step.is_multiple_of(self.interval) {
            reasons.push(SaveReason::Interval);
        }
        if loss < self.running_min {
            reasons.push(SaveReason::NewMinimum);
            self.running_min = loss;
            self.best_step = Some(self.step);
        }
        let action = if reasons.is_empty() { CheckpointAction::Skip } else { CheckpointAction::Save };
        if action == CheckpointAction::Save {
            self.saved.push(self.step);
        }
        CheckpointDecision { step: self.step, loss, running_min: self.running_min, action, reasons }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Planned,
    Running,
    Done,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentCell {
    pub token_budget: u64,
    pub instruction_count: u64,
    pub status: CellStatus,
    pub result: Option<f64>,
}

fn check_axis(name: &'static str, axis: &[u64]) -> Result<(), PlanError> {
    if axis.is_empty() {
        return Err(PlanError::EmptyAxis(name));
    }
    let mut seen = HashSet::new();
    match axis.iter().find(|v| !seen.insert(**v)) {
        Some(&value) => Err(PlanError::DuplicateAxisValue { axis: name, value }),
        None => Ok(()),
    }
}

/// Every (token budget, instruction count) pair, token-major, with empty
/// result slots.
pub fn plan_ablation_grid(tokens: &[u64], instructions: &[u64]) -> Result<Vec<ExperimentCell>, PlanError> {
    check_axis("token", tokens)?;
    check_axis("instruction", instructions)?;
    Ok(tokens
        .iter()
        .flat_map(|&t| {
            instructions.iter().map(move |&i| ExperimentCell {
                token_budget: t,
                instruction_count: i,
                status: CellStatus::Planned,
                result: None,
            })
        })
        .collect())
}
