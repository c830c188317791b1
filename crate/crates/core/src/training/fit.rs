use super::losses::{imitation_loss_prepared, prepare_trajectories, sft_plan_loss, LossGrad};
use super::optim::{lr_at, AdamW};
use super::{SftConfig, TrainingError};
use crate::dataflow::{TaskPlanRecord, TrainingRecord};
use crate::policy::{ModelParams, PlanHead};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub examples: usize,
    pub updates: usize,
    /// Full-corpus loss after each epoch.
    pub epoch_losses: Vec<f64>,
}

/// Minibatch AdamW over item indices, shuffled per epoch from `seed`.
fn fit(
    params: &mut ModelParams,
    n: usize,
    cfg: &SftConfig,
    seed: u64,
    loss: impl Fn(&ModelParams, &[usize]) -> Result<LossGrad, TrainingError>,
) -> Result<FitReport, TrainingError> {
    cfg.validate()?;
    let per_epoch = n.div_ceil(cfg.batch_size);
    let total = per_epoch * cfg.epochs;
    let mut opt = AdamW::new(cfg.weight_decay);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    let all: Vec<usize> = (0..n).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut t = 0;
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let lg = loss(params, batch)?;
            let lr = lr_at(cfg.learning_rate, cfg.schedule, cfg.warmup_steps, t, total);
            let update = opt.step(&lg.grad, lr, |k| params.get(k));
            params.apply(&update, 1.0);
            t += 1;
        }
        epoch_losses.push(loss(params, &all)?.loss);
    }
    Ok(FitReport { examples: n, updates: t, epoch_losses })
}

/// Fits the plan head, first widening its vocabulary to every step in `records`.
pub fn fit_plan(
    params: &ModelParams,
    records: &[TaskPlanRecord],
    cfg: &SftConfig,
    seed: u64,
) -> Result<(ModelParams, FitReport), TrainingError> {
    if records.is_empty() {
        return Err(TrainingError::EmptyCorpus("task-plan records".into()));
    }
    let mut p = params.clone();
    let known = p.plan.vocab[1..].to_vec();
    let vocab = PlanHead::with_vocab(std::iter::once(known.as_slice()).chain(records.iter().map(|r| r.plan.as_slice())));
    p.plan.vocab = vocab.vocab;
    let report = fit(&mut p, records.len(), cfg, seed, |params, idx| {
        let batch: Vec<TaskPlanRecord> = idx.iter().map(|&i| records[i].clone()).collect();
        sft_plan_loss(params, &batch)
    })?;
    Ok((p, report))
}

/// Fits the action and FINISH heads on expert steps, batching whole trajectories.
pub fn fit_imitation(
    params: &ModelParams,
    trajectories: &[Vec<TrainingRecord>],
    cfg: &SftConfig,
    seed: u64,
) -> Result<(ModelParams, FitReport), TrainingError> {
    if trajectories.iter().all(Vec::is_empty) {
        return Err(TrainingError::EmptyCorpus("expert trajectories".into()));
    }
    let prepared = prepare_trajectories(trajectories)?;
    let mut p = params.clone();
    let report = fit(&mut p, prepared.len(), cfg, seed, |params, idx| {
        let batch: Vec<&Vec<_>> = idx.iter().map(|&i| &prepared[i]).collect();
        imitation_loss_prepared(params, &batch, cfg.step_weighting)
    })?;
    Ok((p, report))
}
