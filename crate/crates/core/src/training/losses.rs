//! Plan cross-entropy and step-wise imitation loss with analytic gradients.

use super::TrainingError;
use crate::dataflow::{TaskPlanRecord, TrainingRecord};
use crate::env_sim::{ActionCall, Status};
use crate::policy::{action_feature_names, AgentState, Featurized, Grad, ModelParams, PlanHead, STATUS_FEATURES, END};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub loss: f64,
    pub grad: Grad,
}

/// Keys and values of a dense action/FINISH gradient.
pub fn dense_grad(action: &[f64], status: &[f64]) -> Grad {
    let mut g: Grad = action_feature_names().iter().zip(action).map(|(n, v)| (format!("action.{n}"), *v)).collect();
    g.extend(STATUS_FEATURES.iter().zip(status).map(|(n, v)| (n.to_string(), *v)));
    g
}

/// Mean cross-entropy over every plan position of the batch, the closing END included.
pub fn sft_plan_loss(params: &ModelParams, batch: &[TaskPlanRecord]) -> Result<LossGrad, TrainingError> {
    if batch.is_empty() {
        return Err(TrainingError::EmptyCorpus("plan batch".into()));
    }
    let head = &params.plan;
    let parts: Vec<(f64, Grad, usize)> = batch
        .par_iter()
        .map(|rec| plan_record_loss(head, rec))
        .collect::<Result<_, _>>()?;
    let n: usize = parts.iter().map(|p| p.2).sum();
    let mut grad = Grad::new();
    let mut loss = 0.0;
    for (l, g, _) in parts {
        loss += l;
        for (k, v) in g {
            *grad.entry(k).or_insert(0.0) += v;
        }
    }
    let scale = 1.0 / n as f64;
    grad.values_mut().for_each(|v| *v *= scale);
    Ok(LossGrad { loss: loss * scale, grad })
}

fn plan_record_loss(head: &PlanHead, rec: &TaskPlanRecord) -> Result<(f64, Grad, usize), TrainingError> {
    let tokens = PlanHead::task_tokens(&rec.task);
    let mut targets = Vec::with_capacity(rec.plan.len() + 1);
    for step in rec.plan.iter().map(String::as_str).chain([END]) {
        targets.push(head.index_of(step).ok_or_else(|| TrainingError::UnknownPlanStep(step.to_string()))?);
    }
    let mut loss = 0.0;
    let mut grad = Grad::new();
    let mut prev = None;
    for (i, &t) in targets.iter().enumerate() {
        let pos = head.position(&tokens, prev, i);
        let lp = crate::policy::log_softmax(&head.scores(&pos));
        loss -= lp[t];
        for (v, keys) in pos.keys.iter().enumerate() {
            let d = lp[v].exp() - if v == t { 1.0 } else { 0.0 };
            if d != 0.0 {
                for k in keys {
                    *grad.entry(format!("plan.{k}")).or_insert(0.0) += d;
                }
            }
        }
        prev = Some(t);
    }
    Ok((loss, grad, targets.len()))
}

/// How imitation averages over steps of trajectories with different lengths.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepWeighting {
    /// Mean over trajectories of the mean over their steps.
    #[default]
    TrajectoryMean,
    /// One mean over all steps.
    StepMean,
}

/// One imitation target with its candidate set precomputed.
#[derive(Debug, Clone)]
pub struct PreparedStep {
    pub featurized: Featurized,
    pub target: usize,
    pub status: Status,
}

/// The state a record was taken in and the action it shows, with the resolved control
/// name in `control_text`.
pub fn record_step(rec: &TrainingRecord) -> (AgentState, ActionCall) {
    let o = &rec.output;
    let action = ActionCall {
        step: String::new(),
        control_label: o.control_label.clone(),
        control_text: o.control_name.clone(),
        function: o.function.clone(),
        args: o.args.clone(),
        status: o.status,
    };
    (AgentState::from_record(rec), action)
}

pub fn prepare_record(rec: &TrainingRecord) -> Result<PreparedStep, TrainingError> {
    let (state, action) = record_step(rec);
    prepare(&state, &action).ok_or_else(|| TrainingError::StepActionNotInCandidateSet {
        task_id: rec.task_id.clone(),
        step: rec.step,
    })
}

pub fn prepare(state: &AgentState, action: &ActionCall) -> Option<PreparedStep> {
    let featurized = Featurized::new(state);
    let target = featurized.find_action(action)?;
    Some(PreparedStep { featurized, target, status: action.status })
}

/// Records grouped by task id, in order of first appearance.
pub fn group_trajectories(records: &[TrainingRecord]) -> Vec<Vec<TrainingRecord>> {
    let mut out: Vec<Vec<TrainingRecord>> = Vec::new();
    for r in records {
        match out.iter_mut().find(|t| t[0].task_id == r.task_id) {
            Some(t) => t.push(r.clone()),
            None => out.push(vec![r.clone()]),
        }
    }
    out
}

pub fn prepare_trajectories(trajs: &[Vec<TrainingRecord>]) -> Result<Vec<Vec<PreparedStep>>, TrainingError> {
    trajs.par_iter().map(|t| t.iter().map(prepare_record).collect()).collect()
}

/// −log P(target, status) for one step.
pub fn step_loss(step: &PreparedStep, params: &ModelParams) -> f64 {
    -step.featurized.score(params).log_prob(step.target, step.status)
}

pub fn imitation_loss(
    params: &ModelParams,
    trajectories: &[Vec<TrainingRecord>],
    weighting: StepWeighting,
) -> Result<LossGrad, TrainingError> {
    imitation_loss_prepared(params, &prepare_trajectories(trajectories)?, weighting)
}

pub fn imitation_loss_prepared<T: AsRef<[PreparedStep]> + Sync>(
    params: &ModelParams,
    trajectories: &[T],
    weighting: StepWeighting,
) -> Result<LossGrad, TrainingError> {
    let total: usize = trajectories.iter().map(|t| t.as_ref().len()).sum();
    if total == 0 {
        return Err(TrainingError::EmptyCorpus("imitation batch".into()));
    }
    let n_traj = trajectories.iter().filter(|t| !t.as_ref().is_empty()).count() as f64;
    let weighted: Vec<(f64, &PreparedStep)> = trajectories
        .iter()
        .map(|t| t.as_ref())
        .flat_map(|t| {
            let w = match weighting {
                StepWeighting::TrajectoryMean => 1.0 / (n_traj * t.len() as f64),
                StepWeighting::StepMean => 1.0 / total as f64,
            };
            t.iter().map(move |s| (w, s))
        })
        .collect();
    let parts: Vec<(f64, Vec<f64>, [f64; 6])> = weighted
        .par_iter()
        .map(|(w, s)| {
            let sc = s.featurized.score(params);
            let (ga, gs) = s.featurized.grad_log_prob(&sc, s.target, s.status);
            (-w * sc.log_prob(s.target, s.status), ga.iter().map(|g| -w * g).collect(), gs.map(|g| -w * g))
        })
        .collect();
    let mut loss = 0.0;
    let mut ga = vec![0.0; params.action.len()];
    let mut gs = [0.0; 6];
    for (l, a, s) in parts {
        loss += l;
        ga.iter_mut().zip(a).for_each(|(x, y)| *x += y);
        gs.iter_mut().zip(s).for_each(|(x, y)| *x += y);
    }
    Ok(LossGrad { loss, grad: dense_grad(&ga, &gs) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataflow::Source;
    use crate::policy::CandidateAction;

    fn plan(task: &str, steps: &[&str]) -> TaskPlanRecord {
        TaskPlanRecord {
            task_id: "p".into(),
            task: task.into(),
            plan: steps.iter().map(|s| s.to_string()).collect(),
            source: Source::Doc,
        }
    }

    #[test]
    fn uniform_plan_head_costs_ln_vocab() {
        let names = ["a", "b", "c", "d", "e", "f", "g"].map(String::from);
        let mut p = ModelParams::default();
        p.plan = PlanHead::with_vocab([names.as_slice()]);
        assert_eq!(p.plan.vocab.len(), 8);
        let lg = sft_plan_loss(&p, &[plan("do things", &["a", "c"])]).unwrap();
        assert!((lg.loss - 8f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn confident_correct_plan_costs_nothing() {
        let mut p = ModelParams::default();
        p.plan = PlanHead::with_vocab([["a".to_string(), "b".to_string()].as_slice()]);
        for (k, w) in [("p|^|a", 200.0), ("p|a|b", 200.0), ("p|b|<END>", 200.0)] {
            p.plan.weights.insert(k.into(), w);
        }
        let lg = sft_plan_loss(&p, &[plan("x", &["a", "b"])]).unwrap();
        assert!(lg.loss < 1e-12);
    }

    #[test]
    fn unknown_plan_step_is_rejected() {
        assert!(matches!(
            sft_plan_loss(&ModelParams::default(), &[plan("x", &["zzz"])]),
            Err(TrainingError::UnknownPlanStep(_))
        ));
    }

    #[test]
    fn pure_finish_among_four_uniform_costs_ln4() {
        let mut cands = vec![CandidateAction::finish(); 4];
        for (i, c) in cands.iter_mut().take(3).enumerate() {
            c.function = ["toggle_bold", "toggle_highlight", "insert_table"][i].into();
        }
        let featurized = Featurized { candidates: cands, features: vec![vec![0.0; params().action.len()]; 4], status_features: vec![[0.0; 6]; 4] };
        let step = PreparedStep { featurized, target: 3, status: Status::Finish };
        let traj = vec![vec![step]];
        let lg = imitation_loss_prepared(&params(), &traj, StepWeighting::TrajectoryMean).unwrap();
        assert!((lg.loss - 4f64.ln()).abs() < 1e-12);
    }

    fn params() -> ModelParams {
        ModelParams::default()
    }
}
