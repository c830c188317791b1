use crate::dataflow::{HistoryEntry, RecordInput, TrainingRecord};
use crate::env_sim::{ControlView, EnvSnapshot};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Observations {
    pub controls: Vec<ControlView>,
    pub canvas_digest: String,
}

/// Everything a policy sees at one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub task: String,
    /// 1-based.
    pub step_id: usize,
    pub observations: Observations,
    pub thoughts: String,
    pub previous_actions: Vec<HistoryEntry>,
    pub previous_plan: Vec<String>,
}

impl AgentState {
    pub fn observe(snapshot: &EnvSnapshot, task: &str, step_id: usize, history: &[HistoryEntry], plan: &[String]) -> Self {
        Self {
            task: task.to_string(),
            step_id,
            observations: Observations { controls: snapshot.list_controls(), canvas_digest: snapshot.canvas_digest() },
            thoughts: String::new(),
            previous_actions: history.to_vec(),
            previous_plan: plan.to_vec(),
        }
    }

    /// State rebuilt from a training record's input. The canvas digest is not recorded there
    /// and no feature depends on it.
    pub fn from_input(input: &RecordInput, step_id: usize) -> Self {
        Self {
            task: input.user_request.clone(),
            step_id,
            observations: Observations { controls: input.available_controls.clone(), canvas_digest: String::new() },
            thoughts: String::new(),
            previous_actions: input.step_history.clone(),
            previous_plan: input.previous_plan.clone(),
        }
    }

    pub fn from_record(record: &TrainingRecord) -> Self {
        Self::from_input(&record.input, record.step)
    }

    /// The same shape as a training record's input block.
    pub fn to_record_input(&self) -> RecordInput {
        RecordInput {
            available_controls: self.observations.controls.clone(),
            user_request: self.task.clone(),
            step_history: self.previous_actions.clone(),
            previous_plan: self.previous_plan.clone(),
        }
    }
}
