//! Plan metrics, step-level action metrics, online run metrics and their tables.

pub mod actions;
pub mod online;
pub mod plan;
pub mod report;

pub use actions::{eval_actions, predict_offline, truth_from_records, ActionEvalResult, GroundTruthStep, PredictedStep, TaskActions};
pub use online::{eval_online, OnlineEvalResult};
pub use plan::{eval_plans, match_plan_steps, Matcher, PlanEvalResult, PlanPair};
pub use report::{action_table, online_table, plan_table, Table};

use crate::dataflow::DataflowError;
use crate::oracle::OracleError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no ground truth for task `{0}`")]
    MissingGroundTruth(String),
    #[error("plan matcher failed: {0}")]
    OracleFailure(#[from] OracleError),
    #[error(transparent)]
    Judge(#[from] DataflowError),
}

pub(crate) fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}
