//! Four training phases producing checkpoints `lam1` to `lam4`: plan fitting, imitation of
//! expert steps, self-boosting on tasks the experts failed, and reward-weighted policy
//! optimization over failed steps.

pub mod boost;
pub mod fit;
pub mod losses;
pub mod optim;
pub mod phases;
pub mod ppo;
pub mod reward;

pub use boost::{self_boost, BoostReport, FailedTask};
pub use fit::{fit_imitation, fit_plan, FitReport};
pub use losses::{
    dense_grad, group_trajectories, imitation_loss, imitation_loss_prepared, prepare_record, record_step,
    sft_plan_loss, LossGrad, PreparedStep, StepWeighting,
};
pub use optim::{lr_at, AdamW, Schedule};
pub use phases::{checkpoint_path, load_checkpoint, run_phase, PhaseData, PhaseManifest};
pub use ppo::{adapt_kl_coef, clipped_term, compute_advantage, ppo_objective, ppo_update, PpoReport};
pub use reward::{rm_features, rm_mse, train_reward_model, RewardModel, RewardReport, RewardedStep};

use crate::dataflow::DataflowError;
use crate::io::IoError;
use crate::policy::PolicyError;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainingError {
    #[error("phase {phase} needs checkpoint lam{} first", phase - 1)]
    MissingPredecessor { phase: u8 },
    #[error("empty corpus: {0}")]
    EmptyCorpus(String),
    #[error("step {step} of {task_id}: the recorded action is not among the state's candidates")]
    StepActionNotInCandidateSet { task_id: String, step: usize },
    #[error("plan step `{0}` is not in the plan vocabulary")]
    UnknownPlanStep(String),
    #[error("old policy gives step {index} probability {prob:e}")]
    DegenerateRatio { index: usize, prob: f64 },
    #[error("reward labels must be +1 or -1, got {0}")]
    InvalidReward(f64),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Dataflow(#[from] DataflowError),
    #[error(transparent)]
    Io(#[from] IoError),
}

/// Fitting settings shared by the plan, imitation and merged-corpus phases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SftConfig {
    pub learning_rate: f64,
    pub schedule: Schedule,
    pub warmup_steps: usize,
    pub batch_size: usize,
    pub epochs: usize,
    /// Only plan or action targets contribute to the loss. The linear heads predict nothing
    /// else, so `false` is rejected.
    pub loss_on_target_only: bool,
    pub weight_decay: f64,
    pub step_weighting: StepWeighting,
}

impl Default for SftConfig {
    fn default() -> Self {
        Self {
            learning_rate: 2e-5,
            schedule: Schedule::Cosine,
            warmup_steps: 2,
            batch_size: 16,
            epochs: 3,
            loss_on_target_only: true,
            weight_decay: 0.0,
            step_weighting: StepWeighting::TrajectoryMean,
        }
    }
}

impl SftConfig {
    /// Settings that move linear heads trained from zero within a few dozen epochs.
    pub fn desk_scale() -> Self {
        Self { learning_rate: 0.1, epochs: 40, batch_size: 8, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), TrainingError> {
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 || self.batch_size == 0 || self.epochs == 0 {
            return Err(TrainingError::Config("fitting needs learning_rate > 0, batch_size ≥ 1, epochs ≥ 1".into()));
        }
        if !self.loss_on_target_only {
            return Err(TrainingError::Config("loss_on_target_only = false has no meaning for these heads".into()));
        }
        Ok(())
    }
}

/// Low-rank adapter settings. Recorded for compatibility; the linear reward model has no
/// layers to adapt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoraConfig {
    pub rank: u32,
    pub alpha: u32,
    pub dropout: f64,
}

impl Default for LoraConfig {
    fn default() -> Self {
        Self { rank: 8, alpha: 32, dropout: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardModelConfig {
    pub learning_rate: f64,
    pub schedule: Schedule,
    pub warmup_steps: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: String,
    pub weight_decay: f64,
    pub lora: LoraConfig,
}

impl Default for RewardModelConfig {
    fn default() -> Self {
        Self {
            learning_rate: 2e-5,
            schedule: Schedule::Linear,
            warmup_steps: 0,
            epochs: 2,
            batch_size: 8,
            optimizer: "adamw".into(),
            weight_decay: 0.0,
            lora: LoraConfig::default(),
        }
    }
}

impl RewardModelConfig {
    pub fn desk_scale() -> Self {
        Self { learning_rate: 0.05, epochs: 20, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PpoConfig {
    pub learning_rate: f64,
    /// Token budget per sample. Recorded only; a step here is one structured action.
    pub sample_length: usize,
    pub batch_size: usize,
    pub minibatch_size: usize,
    pub ppo_epochs: usize,
    pub grad_accumulation: usize,
    pub kl_target: f64,
    pub kl_coef_init: f64,
    pub clip_epsilon: f64,
    pub reward_range: (f64, f64),
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1.4e-5,
            sample_length: 256,
            batch_size: 8,
            minibatch_size: 1,
            ppo_epochs: 4,
            grad_accumulation: 1,
            kl_target: 0.1,
            kl_coef_init: 0.2,
            clip_epsilon: 0.2,
            reward_range: (-0.5, 0.5),
        }
    }
}

impl PpoConfig {
    pub fn desk_scale() -> Self {
        Self { learning_rate: 0.01, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), TrainingError> {
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 1.0) {
            return Err(TrainingError::Config("clip_epsilon must lie in (0, 1)".into()));
        }
        if self.reward_range.0 != -self.reward_range.1 || self.reward_range.1 <= 0.0 {
            return Err(TrainingError::Config("reward_range must be symmetric around 0".into()));
        }
        if self.batch_size == 0 || self.minibatch_size == 0 || self.grad_accumulation == 0 {
            return Err(TrainingError::Config("batch sizes must be ≥ 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoostConfig {
    pub attempts: usize,
    pub temperature: f64,
    pub max_steps: usize,
}

impl Default for BoostConfig {
    fn default() -> Self {
        Self { attempts: 3, temperature: 1.0, max_steps: 20 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub seed: u64,
    pub sft: SftConfig,
    pub reward: RewardModelConfig,
    pub ppo: PpoConfig,
    pub boost: BoostConfig,
}

impl TrainingConfig {
    pub fn desk_scale(seed: u64) -> Self {
        Self {
            seed,
            sft: SftConfig::desk_scale(),
            reward: RewardModelConfig::desk_scale(),
            ppo: PpoConfig::desk_scale(),
            boost: BoostConfig::default(),
        }
    }
}
