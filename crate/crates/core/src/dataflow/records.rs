use crate::env_sim::{ActionCall, ActionResult, Args, CanvasDiff, ControlView, EnvSnapshot, Status};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Doc,
    Wikihow,
    Query,
    Evolved,
}

/// Unprocessed input: either a task with a plan or free text to split into both.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawRecord {
    pub id: String,
    pub source: Source,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskPlanRecord {
    pub task_id: String,
    pub task: String,
    pub plan: Vec<String>,
    pub source: Source,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstantiatedTask {
    pub origin_task_id: String,
    pub instantiated_task: String,
    pub template_id: String,
    #[serde(default)]
    pub thought: String,
    pub actions: Vec<ActionCall>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinalStatus {
    Success,
    ExecError,
    /// Nothing was executed: the instantiation produced no actions.
    Discarded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    pub step_no: usize,
    pub action: ActionCall,
    /// Label and text of the control the action resolved to; empty for target-free calls.
    pub control_label: String,
    pub control_name: String,
    /// Indices into the trajectory's snapshot list.
    pub pre: usize,
    pub post: usize,
    pub result: ActionResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub task_id: String,
    pub origin: InstantiatedTask,
    /// The initial snapshot followed by one per successful step.
    pub snapshots: Vec<EnvSnapshot>,
    pub steps: Vec<TrajectoryStep>,
    pub final_status: FinalStatus,
    /// Initial canvas to final canvas.
    pub canvas_diff: CanvasDiff,
}

impl Trajectory {
    pub fn initial(&self) -> &EnvSnapshot {
        &self.snapshots[0]
    }

    pub fn final_snapshot(&self) -> &EnvSnapshot {
        self.snapshots.last().expect("trajectory has an initial snapshot")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskComplete {
    Yes,
    No,
    Unsure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskQuality {
    Ambiguous,
    OverDetailed,
    Good,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluationVerdict {
    pub task_id: String,
    pub task_complete: TaskComplete,
    pub task_quality: TaskQuality,
    pub complete_judgement: String,
    pub quality_judgement: String,
}

/// One previously executed step as shown to the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub step: usize,
    pub control_label: String,
    pub control_name: String,
    pub function: String,
    pub args: Args,
    pub status: Status,
    pub result: ActionResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordInput {
    pub available_controls: Vec<ControlView>,
    pub user_request: String,
    pub step_history: Vec<HistoryEntry>,
    pub previous_plan: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordOutput {
    pub thought: String,
    pub control_label: String,
    pub control_name: String,
    pub function: String,
    pub args: Args,
    pub status: Status,
    pub plan: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub task_id: String,
    pub step: usize,
    pub input: RecordInput,
    pub output: RecordOutput,
}

/// Thought text for an action. Thoughts carry no learnable signal, so both the data
/// pipeline and the agent derive them from the action itself.
pub fn thought_for(step: &str, function: &str, control_name: &str, status: Status) -> String {
    let what = if function.is_empty() {
        "No further action is needed".to_string()
    } else if control_name.is_empty() {
        format!("Call {function}")
    } else {
        format!("Call {function} on '{control_name}'")
    };
    let step = step.trim();
    let lead = if step.is_empty() { String::new() } else { format!("{step}. ") };
    match status {
        Status::Finish => format!("{lead}{what}; the task is complete after this."),
        Status::Continue => format!("{lead}{what}."),
    }
}
