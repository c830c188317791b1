use super::{ratio, EvalError};
use crate::dataflow::TrainingRecord;
use crate::env_sim::Status;
use crate::policy::{action_distribution, select_from, AgentState, ModelParams, SelectMode};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruthStep {
    /// Control texts that count as the right object; empty for target-free operations.
    pub acceptable_objects: BTreeSet<String>,
    pub operation: String,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictedStep {
    pub control_name: String,
    pub function: String,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskActions<T> {
    pub task_id: String,
    pub steps: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskBreakdown {
    pub task_id: String,
    pub truth_steps: usize,
    pub pred_steps: usize,
    pub successful_steps: usize,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionEvalResult {
    pub object_acc: f64,
    pub operation_acc: f64,
    pub status_acc: f64,
    pub ssr: f64,
    pub tsr: f64,
    pub tasks: Vec<TaskBreakdown>,
}

fn object_ok(pred: &PredictedStep, truth: &GroundTruthStep) -> bool {
    if truth.acceptable_objects.is_empty() {
        pred.control_name.is_empty()
    } else {
        truth.acceptable_objects.contains(&pred.control_name)
    }
}

/// Compares steps by position over the ground-truth steps; a missing predicted step is
/// wrong on every count. A task succeeds when every step does and the lengths agree.
/// Ground-truth tasks without a prediction count as empty predictions.
pub fn eval_actions(
    pred: &[TaskActions<PredictedStep>],
    truth: &[TaskActions<GroundTruthStep>],
) -> Result<ActionEvalResult, EvalError> {
    let by_id: BTreeMap<&str, &TaskActions<PredictedStep>> = pred.iter().map(|p| (p.task_id.as_str(), p)).collect();
    let truth_ids: BTreeSet<&str> = truth.iter().map(|t| t.task_id.as_str()).collect();
    if let Some(p) = pred.iter().find(|p| !truth_ids.contains(p.task_id.as_str())) {
        return Err(EvalError::MissingGroundTruth(p.task_id.clone()));
    }
    let (mut n, mut obj, mut op, mut st, mut ok) = (0, 0, 0, 0, 0);
    let mut tasks = Vec::new();
    for t in truth {
        let empty = Vec::new();
        let p = by_id.get(t.task_id.as_str()).map_or(&empty, |p| &p.steps);
        let mut good = 0;
        for (i, g) in t.steps.iter().enumerate() {
            n += 1;
            let Some(s) = p.get(i) else { continue };
            let o = object_ok(s, g);
            let f = s.function == g.operation;
            let c = s.status == g.status;
            obj += o as usize;
            op += f as usize;
            st += c as usize;
            if o && f && c {
                good += 1;
            }
        }
        ok += good;
        tasks.push(TaskBreakdown {
            task_id: t.task_id.clone(),
            truth_steps: t.steps.len(),
            pred_steps: p.len(),
            successful_steps: good,
            success: good == t.steps.len() && p.len() == t.steps.len(),
        });
    }
    let solved = tasks.iter().filter(|t| t.success).count();
    Ok(ActionEvalResult {
        object_acc: ratio(obj, n),
        operation_acc: ratio(op, n),
        status_acc: ratio(st, n),
        ssr: ratio(ok, n),
        tsr: ratio(solved, tasks.len()),
        tasks,
    })
}

fn group<T>(records: &[TrainingRecord], f: impl Fn(&TrainingRecord) -> T) -> Vec<TaskActions<T>> {
    let mut out: Vec<TaskActions<T>> = Vec::new();
    for r in records {
        let step = f(r);
        match out.iter_mut().find(|t| t.task_id == r.task_id) {
            Some(t) => t.steps.push(step),
            None => out.push(TaskActions { task_id: r.task_id.clone(), steps: vec![step] }),
        }
    }
    out
}

pub fn truth_from_records(records: &[TrainingRecord]) -> Vec<TaskActions<GroundTruthStep>> {
    group(records, |r| GroundTruthStep {
        acceptable_objects: Some(r.output.control_name.clone()).filter(|c| !c.is_empty()).into_iter().collect(),
        operation: r.output.function.clone(),
        status: r.output.status,
    })
}

/// Argmax predictions for each recorded state, given the recorded history.
pub fn predict_offline(params: &ModelParams, records: &[TrainingRecord]) -> Vec<TaskActions<PredictedStep>> {
    group(records, |r| {
        let dist = action_distribution(&AgentState::from_record(r), params);
        let c = select_from(&dist, SelectMode::Argmax, r.step);
        PredictedStep { control_name: c.candidate.control_text().to_string(), function: c.candidate.function, status: c.status }
    })
}
