//! Offline clipped-surrogate policy optimization with an adaptive KL penalty.

use super::losses::{dense_grad, prepare, PreparedStep};
use super::optim::AdamW;
use super::{PpoConfig, TrainingError};
use crate::env_sim::{ActionCall, Status};
use crate::policy::{AgentState, Grad, ModelParams, Scores};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Old probabilities below this make the ratio meaningless.
pub const MIN_OLD_PROB: f64 = 1e-12;

/// Maps normalized rewards affinely from [0, 1] onto the reward range and subtracts their mean.
pub fn compute_advantage(rewards: &[f64], cfg: &PpoConfig) -> Vec<f64> {
    let (lo, hi) = cfg.reward_range;
    let scaled: Vec<f64> = rewards.iter().map(|r| lo + (hi - lo) * r).collect();
    let mean = scaled.iter().sum::<f64>() / scaled.len().max(1) as f64;
    scaled.iter().map(|s| s - mean).collect()
}

pub fn clipped_term(ratio: f64, advantage: f64, eps: f64) -> f64 {
    (ratio * advantage).min(ratio.clamp(1.0 - eps, 1.0 + eps) * advantage)
}

/// A step with the behaviour policy's distribution frozen.
#[derive(Debug, Clone)]
pub struct PpoStep {
    pub step: PreparedStep,
    pub old: Scores,
    pub old_log_prob: f64,
}

pub fn prepare_ppo(theta_old: &ModelParams, steps: &[(AgentState, ActionCall)]) -> Result<Vec<PpoStep>, TrainingError> {
    steps
        .par_iter()
        .enumerate()
        .map(|(i, (state, action))| {
            let step = prepare(state, action)
                .ok_or_else(|| TrainingError::StepActionNotInCandidateSet { task_id: state.task.clone(), step: state.step_id })?;
            let old = step.featurized.score(theta_old);
            let old_log_prob = old.log_prob(step.target, step.status);
            if old_log_prob.exp() < MIN_OLD_PROB {
                return Err(TrainingError::DegenerateRatio { index: i, prob: old_log_prob.exp() });
            }
            Ok(PpoStep { step, old, old_log_prob })
        })
        .collect()
}

fn joint(sc: &Scores) -> Vec<(usize, Status, f64)> {
    let mut out = Vec::with_capacity(2 * sc.probs.len());
    for i in 0..sc.probs.len() {
        if sc.is_finish(i) {
            out.push((i, Status::Finish, sc.log_probs[i]));
        } else {
            out.push((i, Status::Finish, sc.log_prob(i, Status::Finish)));
            out.push((i, Status::Continue, sc.log_prob(i, Status::Continue)));
        }
    }
    out
}

/// KL(old ‖ new) over candidate and status jointly.
pub fn step_kl(old: &Scores, new: &Scores) -> f64 {
    joint(old)
        .into_iter()
        .filter(|(_, _, lp)| lp.is_finite())
        .map(|(i, s, lp)| lp.exp() * (lp - new.log_prob(i, s)))
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PpoEval {
    /// Mean clipped surrogate minus β times mean KL.
    pub objective: f64,
    pub surrogate: f64,
    pub kl: f64,
    /// Gradient of the objective (ascent direction).
    pub grad: Grad,
}

pub fn ppo_objective(params: &ModelParams, steps: &[PpoStep], advantages: &[f64], eps: f64, beta: f64) -> PpoEval {
    let n = steps.len().max(1) as f64;
    let dim = params.action.len();
    let parts: Vec<(f64, f64, Vec<f64>, [f64; 6])> = steps
        .par_iter()
        .zip(advantages)
        .map(|(s, &adv)| {
            let f = &s.step.featurized;
            let new = f.score(params);
            let ratio = (new.log_prob(s.step.target, s.step.status) - s.old_log_prob).exp();
            let term = clipped_term(ratio, adv, eps);
            let clipped = (adv >= 0.0 && ratio > 1.0 + eps) || (adv < 0.0 && ratio < 1.0 - eps);
            let mut ga = vec![0.0; dim];
            let mut gs = [0.0; 6];
            if !clipped {
                let (a, st) = f.grad_log_prob(&new, s.step.target, s.step.status);
                ga.iter_mut().zip(a).for_each(|(g, x)| *g = ratio * adv * x);
                gs.iter_mut().zip(st).for_each(|(g, x)| *g = ratio * adv * x);
            }
            // d KL(old‖new) = −(E_old[f] − E_new[f]) for the softmax, and for each
            // candidate −p_old(c)(p_old(F|c) − p_new(F|c)) times its status inputs.
            for (j, x) in f.features.iter().enumerate() {
                let d = s.old.probs[j] - new.probs[j];
                if d != 0.0 {
                    ga.iter_mut().zip(x).for_each(|(g, xi)| *g += beta * d * xi);
                }
                if !new.is_finish(j) {
                    let d = s.old.probs[j] * (s.old.finish_prob(j) - new.finish_prob(j));
                    gs.iter_mut().zip(&f.status_features[j]).for_each(|(g, xi)| *g += beta * d * xi);
                }
            }
            (term, step_kl(&s.old, &new), ga, gs)
        })
        .collect();
    let mut surrogate = 0.0;
    let mut kl = 0.0;
    let mut ga = vec![0.0; dim];
    let mut gs = [0.0; 6];
    for (t, k, a, s) in parts {
        surrogate += t;
        kl += k;
        ga.iter_mut().zip(a).for_each(|(x, y)| *x += y / n);
        gs.iter_mut().zip(s).for_each(|(x, y)| *x += y / n);
    }
    surrogate /= n;
    kl /= n;
    PpoEval { objective: surrogate - beta * kl, surrogate, kl, grad: dense_grad(&ga, &gs) }
}

/// β after one measurement: doubled above 1.5× target, halved below target / 1.5.
pub fn adapt_kl_coef(beta: f64, kl: f64, target: f64) -> f64 {
    if kl > 1.5 * target {
        beta * 2.0
    } else if kl < target / 1.5 {
        beta / 2.0
    } else {
        beta
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpoReport {
    pub steps: usize,
    pub updates: usize,
    pub surrogate_before: f64,
    pub surrogate_after: f64,
    pub final_kl: f64,
    pub final_kl_coef: f64,
}

pub fn ppo_update(
    theta: &ModelParams,
    theta_old: &ModelParams,
    steps: &[(AgentState, ActionCall)],
    advantages: &[f64],
    cfg: &PpoConfig,
) -> Result<(ModelParams, PpoReport), TrainingError> {
    if steps.is_empty() {
        return Err(TrainingError::EmptyCorpus("policy optimization steps".into()));
    }
    if advantages.len() != steps.len() {
        return Err(TrainingError::Config("one advantage per step is required".into()));
    }
    let prepared = prepare_ppo(theta_old, steps)?;
    let eps = cfg.clip_epsilon;
    let mut params = theta.clone();
    let mut beta = cfg.kl_coef_init;
    let mut opt = AdamW::new(0.0);
    let mut updates = 0;
    let before = ppo_objective(&params, &prepared, advantages, eps, beta).surrogate;
    let idx: Vec<usize> = (0..prepared.len()).collect();
    for batch in idx.chunks(cfg.batch_size.max(1)) {
        let b_steps: Vec<PpoStep> = batch.iter().map(|&i| prepared[i].clone()).collect();
        let b_adv: Vec<f64> = batch.iter().map(|&i| advantages[i]).collect();
        for _ in 0..cfg.ppo_epochs {
            let mut acc = Grad::new();
            let mut pending = 0;
            for (mb, mb_adv) in b_steps.chunks(cfg.minibatch_size.max(1)).zip(b_adv.chunks(cfg.minibatch_size.max(1))) {
                let eval = ppo_objective(&params, mb, mb_adv, eps, beta);
                for (k, g) in eval.grad {
                    *acc.entry(k).or_insert(0.0) -= g;
                }
                pending += 1;
                if pending == cfg.grad_accumulation.max(1) {
                    acc.values_mut().for_each(|g| *g /= pending as f64);
                    let update = opt.step(&acc, cfg.learning_rate, |k| params.get(k));
                    params.apply(&update, 1.0);
                    updates += 1;
                    acc.clear();
                    pending = 0;
                }
            }
            if pending > 0 {
                acc.values_mut().for_each(|g| *g /= pending as f64);
                let update = opt.step(&acc, cfg.learning_rate, |k| params.get(k));
                params.apply(&update, 1.0);
                updates += 1;
            }
            let kl = ppo_objective(&params, &b_steps, &b_adv, eps, beta).kl;
            beta = adapt_kl_coef(beta, kl, cfg.kl_target);
        }
    }
    let after = ppo_objective(&params, &prepared, advantages, eps, beta);
    let report = PpoReport {
        steps: prepared.len(),
        updates,
        surrogate_before: before,
        surrogate_after: after.surrogate,
        final_kl: after.kl,
        final_kl_coef: beta,
    };
    Ok((params, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clip_examples() {
        assert_eq!(clipped_term(1.5, 1.0, 0.2), 1.2);
        assert_eq!(clipped_term(0.5, -1.0, 0.2), -0.8);
        assert_eq!(clipped_term(1.1, 2.0, 0.2), 1.1 * 2.0);
    }

    #[test]
    fn advantage_affine_and_centered() {
        let cfg = PpoConfig::default();
        assert_eq!(compute_advantage(&[0.0, 1.0], &cfg), [-0.5, 0.5]);
        assert!(compute_advantage(&[0.3; 4], &cfg).iter().all(|a| *a == 0.0));
        let a = compute_advantage(&[0.1, 0.9, 0.35, 0.7, 0.2], &cfg);
        assert!(a.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn kl_controller() {
        assert_eq!(adapt_kl_coef(0.2, 0.2, 0.1), 0.4);
        assert_eq!(adapt_kl_coef(0.2, 0.01, 0.1), 0.1);
        assert_eq!(adapt_kl_coef(0.2, 0.1, 0.1), 0.2);
    }
}
