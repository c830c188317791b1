//! Candidate enumeration, featurization and the log-linear policy over candidates.

pub mod candidates;
pub mod features;
pub mod model;
pub mod plan;
pub mod state;

pub use candidates::{enumerate, CandidateAction, TaskArgs};
pub use features::{action_feature_names, n_action_features, StateContext, STATUS_FEATURES};
pub use model::{
    action_distribution, dot, select_action, select_from, sigmoid, Checkpoint, Choice, Distribution, Featurized, Grad, ModelParams,
    Scores, SelectMode,
};
pub use plan::{log_softmax, PlanHead, END, MAX_PLAN_STEPS};
pub use state::{AgentState, Observations};

use crate::io::IoError;

#[derive(Debug, thiserror::Error)]
pub enum PolicyError {
    #[error("unsupported checkpoint {format} v{version}")]
    Version { format: String, version: u32 },
    #[error("unknown weight `{0}`")]
    UnknownFeature(String),
    #[error("malformed checkpoint: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] IoError),
}
