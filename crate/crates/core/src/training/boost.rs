//! Collecting new successes by sampling the current policy on tasks the experts failed.

use super::{BoostConfig, TrainingError};
use crate::agent::{run_task, AgentConfig, FixedClock, LearnedPolicy};
use crate::dataflow::{judge_trajectory, EvaluationVerdict, FinalStatus, TaskComplete, Trajectory};
use crate::oracle::Oracle;
use crate::policy::{ModelParams, SelectMode};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailedTask {
    pub task_id: String,
    pub template_id: String,
    pub task: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoostReport {
    pub tasks: usize,
    pub attempts: usize,
    pub successes: usize,
}

fn attempt_seed(seed: u64, task_id: &str, attempt: usize) -> u64 {
    // FNV-1a over the id keeps seeds independent of task order.
    let h = task_id.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3));
    h ^ seed.rotate_left(17) ^ (attempt as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Up to `cfg.attempts` sampled runs per task; the first run the judge accepts is kept.
pub fn self_boost(
    params: &ModelParams,
    failed: &[FailedTask],
    oracle: &dyn Oracle,
    cfg: &BoostConfig,
    seed: u64,
) -> Result<(Vec<(Trajectory, EvaluationVerdict)>, BoostReport), TrainingError> {
    let agent_cfg = AgentConfig { max_steps: cfg.max_steps };
    let results: Vec<(Option<(Trajectory, EvaluationVerdict)>, usize)> = failed
        .par_iter()
        .map(|t| {
            for attempt in 0..cfg.attempts {
                let policy = LearnedPolicy {
                    params: params.clone(),
                    mode: SelectMode::Sample { seed: attempt_seed(seed, &t.task_id, attempt), temperature: cfg.temperature },
                };
                let run = run_task(&policy, &FixedClock(0.0), &agent_cfg, &t.task_id, &t.template_id, &t.task)
                    .map_err(|e| TrainingError::Config(format!("{}: {e}", t.task_id)))?;
                if run.trajectory.final_status != FinalStatus::Success {
                    continue;
                }
                let verdict = judge_trajectory(&run.trajectory, oracle)?;
                if verdict.task_complete == TaskComplete::Yes {
                    return Ok((Some((run.trajectory, verdict)), attempt + 1));
                }
            }
            Ok((None, cfg.attempts))
        })
        .collect::<Result<_, TrainingError>>()?;
    let attempts = results.iter().map(|r| r.1).sum();
    let kept: Vec<_> = results.into_iter().filter_map(|r| r.0).collect();
    let report = BoostReport { tasks: failed.len(), attempts, successes: kept.len() };
    Ok((kept, report))
}
