use super::{ratio, EvalError};
use crate::agent::{Outcome, RunRecord};
use crate::dataflow::{judge_trajectory, FinalStatus, TaskComplete};
use crate::oracle::Oracle;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineEvalResult {
    pub runs: usize,
    pub successes: usize,
    pub tsr: f64,
    pub mean_completion_seconds: f64,
    pub mean_steps: f64,
    /// Total time over total steps.
    pub mean_step_latency: f64,
    /// Per-run verdicts, in input order.
    pub success: Vec<bool>,
}

/// A run succeeds when it finished on its own and the judge accepts its trajectory.
pub fn eval_online(runs: &[RunRecord], judge: &dyn Oracle) -> Result<OnlineEvalResult, EvalError> {
    let success: Vec<bool> = runs
        .par_iter()
        .map(|r| {
            if r.outcome != Outcome::Finished || r.trajectory.final_status != FinalStatus::Success {
                return Ok(false);
            }
            Ok(judge_trajectory(&r.trajectory, judge)?.task_complete == TaskComplete::Yes)
        })
        .collect::<Result<_, EvalError>>()?;
    let total_time: f64 = runs.iter().map(|r| r.total_seconds).sum();
    let total_steps: usize = runs.iter().map(RunRecord::steps).sum();
    let n = runs.len();
    let successes = success.iter().filter(|s| **s).count();
    Ok(OnlineEvalResult {
        runs: n,
        successes,
        tsr: ratio(successes, n),
        mean_completion_seconds: if n == 0 { 0.0 } else { total_time / n as f64 },
        mean_steps: ratio(total_steps, n),
        mean_step_latency: if total_steps == 0 { 0.0 } else { total_time / total_steps as f64 },
        success,
    })
}
