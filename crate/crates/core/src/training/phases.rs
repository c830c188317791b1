//! Phase runner: reads a corpus, trains from the predecessor checkpoint and writes
//! `lam<n>/weights.json` with a manifest describing the data consumed.

use super::boost::{self_boost, FailedTask};
use super::fit::{fit_imitation, fit_plan};
use super::losses::{group_trajectories, record_step};
use super::ppo::{compute_advantage, ppo_update, MIN_OLD_PROB};
use super::reward::{rm_features, train_reward_model, RewardModel, RewardedStep};
use super::{TrainingConfig, TrainingError};
use crate::dataflow::pipeline::{EVOLVED_FILE, INSTANTIATED_FILE, TASKPLAN_FILE, TRAINING_FILE, TRAJECTORIES_FILE, VERDICTS_FILE};
use crate::dataflow::{
    postprocess, trajectory_records, EvaluationVerdict, InstantiatedTask, TaskComplete, TaskPlanRecord,
    TrainingRecord, Trajectory,
};
use crate::env_sim::ActionCall;
use crate::io;
use crate::oracle::Oracle;
use crate::policy::{AgentState, Featurized, ModelParams};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

pub const WEIGHTS_FILE: &str = "weights.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const BOOSTED_FILE: &str = "boosted.jsonl";
pub const REWARD_FILE: &str = "reward.json";

/// Everything the phases read, gathered from one corpus directory.
#[derive(Debug, Clone, Default)]
pub struct PhaseData {
    pub task_plans: Vec<TaskPlanRecord>,
    pub expert_records: Vec<TrainingRecord>,
    /// Tasks whose expert attempt failed to execute or was not accepted.
    pub failed_tasks: Vec<FailedTask>,
    /// Those attempts, for the ones that executed at least one step.
    pub failure_trajectories: Vec<Trajectory>,
}

fn read_if_exists<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, TrainingError> {
    if path.exists() {
        Ok(io::read_jsonl(path)?)
    } else {
        Ok(Vec::new())
    }
}

impl PhaseData {
    /// Plans come from the evolved corpus when present, else the normalized one.
    pub fn from_corpus(dir: &Path) -> Result<Self, TrainingError> {
        let evolved = dir.join(EVOLVED_FILE);
        let plans = if evolved.exists() { evolved } else { dir.join(TASKPLAN_FILE) };
        let task_plans = read_if_exists(&plans)?;
        let expert_records = read_if_exists(&dir.join(TRAINING_FILE))?;
        let insts: Vec<InstantiatedTask> = read_if_exists(&dir.join(INSTANTIATED_FILE))?;
        let trajs: Vec<Trajectory> = read_if_exists(&dir.join(TRAJECTORIES_FILE))?;
        let verdicts: Vec<EvaluationVerdict> = read_if_exists(&dir.join(VERDICTS_FILE))?;
        Ok(Self::from_parts(task_plans, expert_records, &insts, trajs, &verdicts))
    }

    pub fn from_parts(
        task_plans: Vec<TaskPlanRecord>,
        expert_records: Vec<TrainingRecord>,
        insts: &[InstantiatedTask],
        trajs: Vec<Trajectory>,
        verdicts: &[EvaluationVerdict],
    ) -> Self {
        let accepted: BTreeSet<&str> =
            verdicts.iter().filter(|v| v.task_complete == TaskComplete::Yes).map(|v| v.task_id.as_str()).collect();
        let mut failed_tasks: Vec<FailedTask> = insts
            .iter()
            .filter(|i| !accepted.contains(i.origin_task_id.as_str()))
            .map(|i| FailedTask {
                task_id: i.origin_task_id.clone(),
                template_id: i.template_id.clone(),
                task: i.instantiated_task.clone(),
            })
            .collect();
        // Trajectories may exist without their instantiation file.
        for t in trajs.iter().filter(|t| !accepted.contains(t.task_id.as_str())) {
            if !failed_tasks.iter().any(|f| f.task_id == t.task_id) {
                failed_tasks.push(FailedTask {
                    task_id: t.task_id.clone(),
                    template_id: t.origin.template_id.clone(),
                    task: t.origin.instantiated_task.clone(),
                });
            }
        }
        failed_tasks.sort_by(|a, b| a.task_id.cmp(&b.task_id));
        let failure_trajectories = trajs
            .into_iter()
            .filter(|t| !accepted.contains(t.task_id.as_str()) && !t.steps.is_empty())
            .collect();
        Self { task_plans, expert_records, failed_tasks, failure_trajectories }
    }
}

/// Data summary and settings of one phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseManifest {
    pub phase: u8,
    pub checkpoint: String,
    pub predecessor: Option<String>,
    pub data_type: String,
    pub source: String,
    pub input_output: String,
    pub size: usize,
    pub seed: u64,
    pub config: TrainingConfig,
    pub details: Value,
    /// File name → sha256 of what this phase wrote.
    pub outputs: BTreeMap<String, String>,
}

pub fn checkpoint_dir(root: &Path, phase: u8) -> PathBuf {
    root.join(format!("lam{phase}"))
}

pub fn checkpoint_path(root: &Path, phase: u8) -> PathBuf {
    checkpoint_dir(root, phase).join(WEIGHTS_FILE)
}

pub fn load_checkpoint(root: &Path, phase: u8) -> Result<ModelParams, TrainingError> {
    Ok(ModelParams::load(&checkpoint_path(root, phase))?)
}

fn predecessor(root: &Path, phase: u8) -> Result<ModelParams, TrainingError> {
    let path = checkpoint_path(root, phase - 1);
    if !path.exists() {
        return Err(TrainingError::MissingPredecessor { phase });
    }
    Ok(ModelParams::load(&path)?)
}

/// Records of the self-boosted successes saved by phase 3, if any.
pub fn boosted_records(root: &Path) -> Result<Vec<TrainingRecord>, TrainingError> {
    read_if_exists(&checkpoint_dir(root, 3).join(BOOSTED_FILE))
}

fn rewarded(records: &[TrainingRecord], reward: f64) -> Vec<RewardedStep> {
    records
        .iter()
        .map(|r| {
            let (state, action) = record_step(r);
            RewardedStep { state, action, reward }
        })
        .collect()
}

/// Trains phase `n` into `root/lam<n>/`.
pub fn run_phase(
    n: u8,
    data: &PhaseData,
    cfg: &TrainingConfig,
    root: &Path,
    oracle: &dyn Oracle,
) -> Result<PhaseManifest, TrainingError> {
    if !(1..=4).contains(&n) {
        return Err(TrainingError::Config(format!("phase must be 1 to 4, got {n}")));
    }
    let base = if n == 1 { ModelParams::default() } else { predecessor(root, n)? };
    let dir = checkpoint_dir(root, n);
    let mut extra_files: Vec<(&str, Vec<u8>)> = Vec::new();
    let seed = cfg.seed.wrapping_add(n as u64);
    let (params, data_type, source, input_output, size, details) = match n {
        1 => {
            let (p, rep) = fit_plan(&base, &data.task_plans, &cfg.sft, seed)?;
            let details = json!({ "fit": rep, "plan_vocabulary": p.plan.vocab.len() });
            (p, "task-plan pairs", "normalized and evolved task descriptions", "task -> plan", data.task_plans.len(), details)
        }
        2 => {
            let trajs = group_trajectories(&data.expert_records);
            let (p, rep) = fit_imitation(&base, &trajs, &cfg.sft, seed)?;
            let details = json!({ "fit": rep, "trajectories": trajs.len() });
            (p, "task-action trajectories", "judged expert demonstrations", "state -> action", data.expert_records.len(), details)
        }
        3 => {
            let (kept, boost) = self_boost(&base, &data.failed_tasks, oracle, &cfg.boost, seed)?;
            let new_records: Vec<TrainingRecord> = kept.iter().flat_map(|(t, v)| postprocess(t, v)).collect();
            let mut merged = data.expert_records.clone();
            merged.extend(new_records.iter().cloned());
            let trajs = group_trajectories(&merged);
            let (p, rep) = fit_imitation(&base, &trajs, &cfg.sft, seed)?;
            extra_files.push((BOOSTED_FILE, io::to_jsonl(&new_records).into_bytes()));
            let details = json!({
                "fit": rep,
                "boost": boost,
                "expert_trajectories": group_trajectories(&data.expert_records).len(),
                "new_trajectories": kept.len(),
                "merged_trajectories": trajs.len(),
                "new_records": new_records.len(),
            });
            (p, "task-action trajectories", "expert demonstrations plus self-boosted successes", "state -> action", merged.len(), details)
        }
        _ => {
            let mut success = data.expert_records.clone();
            success.extend(boosted_records(root)?);
            let failure: Vec<TrainingRecord> = data.failure_trajectories.iter().flat_map(trajectory_records).collect();
            let mut steps = rewarded(&success, 1.0);
            steps.extend(rewarded(&failure, -1.0));
            let (rm, rm_report) = train_reward_model(&RewardModel::default(), &steps, &cfg.reward, seed)?;
            // Policy optimization only sees failed steps the policy could have produced.
            let mut ppo_steps: Vec<(AgentState, ActionCall)> = Vec::new();
            let mut rewards = Vec::new();
            let (mut unmatched, mut degenerate) = (0, 0);
            for r in &failure {
                let (state, action) = record_step(r);
                let f = Featurized::new(&state);
                let Some(i) = f.find_action(&action) else {
                    unmatched += 1;
                    continue;
                };
                if f.score(&base).prob(i, action.status) < MIN_OLD_PROB {
                    degenerate += 1;
                    continue;
                }
                let x = rm_features(&state, &action).expect("matched step has features");
                rewards.push(rm.normalized(&x));
                ppo_steps.push((state, action));
            }
            let advantages: Vec<f64> =
                rewards.chunks(cfg.ppo.batch_size.max(1)).flat_map(|c| compute_advantage(c, &cfg.ppo)).collect();
            cfg.ppo.validate()?;
            let (p, ppo_report) = if ppo_steps.is_empty() {
                (base.clone(), None)
            } else {
                let (p, rep) = ppo_update(&base, &base, &ppo_steps, &advantages, &cfg.ppo)?;
                (p, Some(rep))
            };
            extra_files.push((REWARD_FILE, rm.to_json().into_bytes()));
            let details = json!({
                "reward_model": rm_report,
                "success_steps": success.len(),
                "failure_steps": failure.len(),
                "optimized_steps": ppo_steps.len(),
                "unmatched_steps": unmatched,
                "degenerate_steps": degenerate,
                "ppo": ppo_report,
            });
            (p, "task-action trajectories with rewards", "successful and failed trajectories", "(state, action) -> reward", steps.len(), details)
        }
    };
    let weights = params.to_json();
    let mut outputs = BTreeMap::new();
    outputs.insert(WEIGHTS_FILE.to_string(), io::sha256_hex(weights.as_bytes()));
    io::write_atomic(&dir.join(WEIGHTS_FILE), weights.as_bytes())?;
    for (name, bytes) in &extra_files {
        outputs.insert(name.to_string(), io::sha256_hex(bytes));
        io::write_atomic(&dir.join(name), bytes)?;
    }
    let manifest = PhaseManifest {
        phase: n,
        checkpoint: format!("lam{n}"),
        predecessor: (n > 1).then(|| format!("lam{}", n - 1)),
        data_type: data_type.into(),
        source: source.into(),
        input_output: input_output.into(),
        size,
        seed: cfg.seed,
        config: cfg.clone(),
        details,
        outputs,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    io::write_atomic(&dir.join(MANIFEST_FILE), text.as_bytes())?;
    Ok(manifest)
}
