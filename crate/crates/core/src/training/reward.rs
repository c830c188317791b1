//! Linear reward model over (state, action) features, fit by squared error to ±1 labels.

use super::optim::{lr_at, AdamW};
use super::{RewardModelConfig, TrainingError};
use crate::env_sim::{ActionCall, Status};
use crate::io;
use crate::policy::{action_feature_names, dot, sigmoid, AgentState, Featurized, Grad, STATUS_FEATURES};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use std::sync::OnceLock;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardedStep {
    pub state: AgentState,
    /// `control_text` holds the resolved control name.
    pub action: ActionCall,
    /// +1 for steps of successful trajectories, −1 otherwise.
    pub reward: f64,
}

/// Feature names: the action features, the FINISH-head inputs, the emitted status, a bias.
pub fn rm_feature_names() -> &'static [String] {
    static NAMES: OnceLock<Vec<String>> = OnceLock::new();
    NAMES.get_or_init(|| {
        let mut v: Vec<String> = action_feature_names().to_vec();
        v.extend(STATUS_FEATURES.iter().map(|s| s.to_string()));
        v.push("emit.finish".into());
        v.push("rm.bias".into());
        v
    })
}

/// Features of the step, or `None` when its action is not among the state's candidates.
pub fn rm_features(state: &AgentState, action: &ActionCall) -> Option<Vec<f64>> {
    let f = Featurized::new(state);
    let i = f.find_action(action)?;
    let mut x = f.features[i].clone();
    x.extend(f.status_features[i]);
    x.push(if action.status == Status::Finish { 1.0 } else { 0.0 });
    x.push(1.0);
    Some(x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardModel {
    pub weights: Vec<f64>,
}

impl Default for RewardModel {
    fn default() -> Self {
        Self { weights: vec![0.0; rm_feature_names().len()] }
    }
}

impl RewardModel {
    pub fn raw(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x)
    }

    /// Reward in [0, 1].
    pub fn normalized(&self, x: &[f64]) -> f64 {
        sigmoid(self.raw(x))
    }

    pub fn to_json(&self) -> String {
        let map: BTreeMap<&str, f64> =
            rm_feature_names().iter().map(String::as_str).zip(self.weights.iter().copied()).collect();
        serde_json::to_string_pretty(&serde_json::json!({ "format": "lam-reward", "version": 1, "weights": map }))
            .expect("weights serialize")
            + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self, TrainingError> {
        #[derive(Deserialize)]
        struct Repr {
            weights: BTreeMap<String, f64>,
        }
        let repr: Repr = serde_json::from_str(text).map_err(|e| TrainingError::Checkpoint(e.to_string()))?;
        let names = rm_feature_names();
        if repr.weights.len() != names.len() {
            return Err(TrainingError::Checkpoint("reward weights incomplete".into()));
        }
        let weights = names
            .iter()
            .map(|n| repr.weights.get(n).copied().ok_or_else(|| TrainingError::Checkpoint(format!("missing `{n}`"))))
            .collect::<Result<_, _>>()?;
        Ok(Self { weights })
    }

    pub fn save(&self, path: &Path) -> Result<(), TrainingError> {
        Ok(io::write_atomic(path, self.to_json().as_bytes())?)
    }
}

/// Mean squared error of the raw output against the labels, and its gradient.
pub fn rm_mse(weights: &[f64], rows: &[(Vec<f64>, f64)]) -> (f64, Vec<f64>) {
    let n = rows.len().max(1) as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; weights.len()];
    for (x, y) in rows {
        let e = dot(weights, x) - y;
        loss += e * e;
        grad.iter_mut().zip(x).for_each(|(g, xi)| *g += 2.0 * e * xi);
    }
    grad.iter_mut().for_each(|g| *g /= n);
    (loss / n, grad)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardReport {
    pub steps: usize,
    pub skipped: usize,
    pub updates: usize,
    pub final_mse: f64,
}

/// Feature rows of the steps whose actions are candidates, and how many were skipped.
/// Feature vector and label.
pub type Row = (Vec<f64>, f64);

pub fn rm_rows(steps: &[RewardedStep]) -> Result<(Vec<Row>, usize), TrainingError> {
    let mut rows = Vec::new();
    let mut skipped = 0;
    for s in steps {
        if s.reward != 1.0 && s.reward != -1.0 {
            return Err(TrainingError::InvalidReward(s.reward));
        }
        match rm_features(&s.state, &s.action) {
            Some(x) => rows.push((x, s.reward)),
            None => skipped += 1,
        }
    }
    Ok((rows, skipped))
}

pub fn train_reward_model(
    rm: &RewardModel,
    steps: &[RewardedStep],
    cfg: &RewardModelConfig,
    seed: u64,
) -> Result<(RewardModel, RewardReport), TrainingError> {
    let (rows, skipped) = rm_rows(steps)?;
    let (model, mut report) = fit_rows(rm, &rows, cfg, seed)?;
    report.skipped = skipped;
    Ok((model, report))
}

/// Minibatch AdamW on the squared error of feature rows.
pub fn fit_rows(
    rm: &RewardModel,
    rows: &[(Vec<f64>, f64)],
    cfg: &RewardModelConfig,
    seed: u64,
) -> Result<(RewardModel, RewardReport), TrainingError> {
    if rows.is_empty() {
        return Err(TrainingError::EmptyCorpus("reward steps".into()));
    }
    let names = rm_feature_names();
    let mut w = rm.weights.clone();
    let mut opt = AdamW::new(cfg.weight_decay);
    let batch = cfg.batch_size.max(1);
    let per_epoch = rows.len().div_ceil(batch);
    let total = per_epoch * cfg.epochs;
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = 0;
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            let sub: Vec<(Vec<f64>, f64)> = chunk.iter().map(|&i| rows[i].clone()).collect();
            let (_, g) = rm_mse(&w, &sub);
            let grad: Grad = names.iter().cloned().zip(g).collect();
            let lr = lr_at(cfg.learning_rate, cfg.schedule, cfg.warmup_steps, t, total);
            let index = |k: &str| names.iter().position(|n| n == k).expect("known name");
            let update = opt.step(&grad, lr, |k| w[index(k)]);
            for (k, d) in update {
                w[index(&k)] += d;
            }
            t += 1;
        }
    }
    let (final_mse, _) = rm_mse(&w, rows);
    Ok((RewardModel { weights: w }, RewardReport { steps: rows.len(), skipped: 0, updates: t, final_mse }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable() -> Vec<(Vec<f64>, f64)> {
        let n = rm_feature_names().len();
        (0..20)
            .map(|i| {
                let mut x = vec![0.0; n];
                let good = i % 2 == 0;
                x[13] = if good { 1.0 } else { 0.0 };
                x[n - 1] = 1.0;
                (x, if good { 1.0 } else { -1.0 })
            })
            .collect()
    }

    #[test]
    fn separable_set_fits_in_two_epochs() {
        let cfg = RewardModelConfig { learning_rate: 0.5, batch_size: 1, ..RewardModelConfig::default() };
        let (_, report) = fit_rows(&RewardModel::default(), &separable(), &cfg, 1).unwrap();
        assert_eq!(cfg.epochs, 2);
        assert!(report.final_mse < 0.1, "mse {}", report.final_mse);
    }

    #[test]
    fn constant_predictor_on_all_success() {
        let n = rm_feature_names().len();
        let mut w = vec![0.0; n];
        w[n - 1] = 1.0;
        let mut x = vec![0.0; n];
        x[n - 1] = 1.0;
        let rows = vec![(x, 1.0); 5];
        assert_eq!(rm_mse(&w, &rows).0, 0.0);
    }

    #[test]
    fn normalized_output_in_unit_interval() {
        let rm = RewardModel { weights: vec![50.0; rm_feature_names().len()] };
        for s in [-3.0, 0.0, 7.0] {
            let r = rm.normalized(&vec![s; rm.weights.len()]);
            assert!((0.0..=1.0).contains(&r));
        }
    }

    #[test]
    fn json_roundtrip() {
        let mut rm = RewardModel::default();
        rm.weights[3] = 0.125;
        assert_eq!(RewardModel::from_json(&rm.to_json()).unwrap(), rm);
    }
}
