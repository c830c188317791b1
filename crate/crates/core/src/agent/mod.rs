//! The observe, decide, execute, remember loop over one simulated application session.

use crate::dataflow::{FinalStatus, HistoryEntry, InstantiatedTask, Trajectory, TrajectoryStep};
use crate::dataflow::execute::grounded_control;
use crate::env_sim::{diff_canvas, templates, ActionCall, ActionResult, EnvError, EnvSnapshot, Status};
use crate::policy::{select_action, AgentState, ModelParams, SelectMode};
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Consecutive failed actions after which a run is abandoned.
pub const MAX_CONSECUTIVE_ERRORS: usize = 3;

pub trait Policy: Send + Sync {
    fn plan(&self, task: &str) -> Vec<String>;
    /// The next action; `step` is the plan step the agent is on, or empty past the plan.
    fn act(&self, state: &AgentState, step: &str) -> ActionCall;
}

#[derive(Debug, Clone)]
pub struct LearnedPolicy {
    pub params: ModelParams,
    pub mode: SelectMode,
}

impl Policy for LearnedPolicy {
    fn plan(&self, task: &str) -> Vec<String> {
        self.params.generate_plan(task)
    }

    fn act(&self, state: &AgentState, step: &str) -> ActionCall {
        select_action(state, &self.params, self.mode, step)
    }
}

/// Replays fixed actions in order, marking the last one FINISH.
#[derive(Debug, Clone)]
pub struct ScriptedPolicy {
    pub actions: Vec<ActionCall>,
}

impl Policy for ScriptedPolicy {
    fn plan(&self, _task: &str) -> Vec<String> {
        self.actions.iter().map(|a| a.step.clone()).collect()
    }

    fn act(&self, state: &AgentState, step: &str) -> ActionCall {
        match self.actions.get(state.step_id - 1) {
            Some(a) => {
                let last = state.step_id == self.actions.len();
                ActionCall { status: if last { Status::Finish } else { Status::Continue }, ..a.clone() }
            }
            None => ActionCall::finish(step),
        }
    }
}

/// Source of per-step durations.
pub trait Clock: Send + Sync {
    fn seconds_since(&self, started: Instant) -> f64;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct WallClock;

impl Clock for WallClock {
    fn seconds_since(&self, started: Instant) -> f64 {
        started.elapsed().as_secs_f64()
    }
}

/// Every step takes the same fixed time, which keeps reports reproducible.
#[derive(Debug, Clone, Copy, Default)]
pub struct FixedClock(pub f64);

impl Clock for FixedClock {
    fn seconds_since(&self, _started: Instant) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Memory {
    pub history: Vec<HistoryEntry>,
    pub previous_plan: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub max_steps: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self { max_steps: 20 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Finished,
    MaxStepsExceeded,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub task: String,
    pub trajectory: Trajectory,
    pub outcome: Outcome,
    pub step_seconds: Vec<f64>,
    pub total_seconds: f64,
}

impl RunRecord {
    pub fn steps(&self) -> usize {
        self.trajectory.steps.len()
    }
}

pub fn observe(snapshot: &EnvSnapshot, task: &str, memory: &Memory, step_id: usize) -> AgentState {
    AgentState::observe(snapshot, task, step_id, &memory.history, &memory.previous_plan)
}

/// Runs `task` from the template's start state until FINISH, `max_steps`, or
/// [`MAX_CONSECUTIVE_ERRORS`] failed actions in a row. Failed actions leave the document
/// unchanged and are remembered like any other.
pub fn run_task(
    policy: &dyn Policy,
    clock: &dyn Clock,
    cfg: &AgentConfig,
    task_id: &str,
    template_id: &str,
    task: &str,
) -> Result<RunRecord, EnvError> {
    let plan = policy.plan(task);
    let mut snapshots = vec![templates::load_template(template_id)?];
    let mut steps: Vec<TrajectoryStep> = Vec::new();
    let mut memory = Memory::default();
    let mut step_seconds = Vec::new();
    let mut consecutive_errors = 0;
    let mut outcome = Outcome::MaxStepsExceeded;
    for step_id in 1..=cfg.max_steps.max(1) {
        let started = Instant::now();
        let pre = snapshots.len() - 1;
        let state = observe(&snapshots[pre], task, &memory, step_id);
        let plan_step = plan.get(step_id - 1).map_or("", String::as_str);
        let action = policy.act(&state, plan_step);
        if action.is_pure_finish() {
            outcome = Outcome::Finished;
            break;
        }
        let snap = &snapshots[pre];
        let executed =
            grounded_control(snap, &action).and_then(|ctrl| snap.apply_action(&action).map(|(next, r)| (ctrl, next, r)));
        let (label, name, post, result) = match executed {
            Ok(((label, name), next, result)) => {
                snapshots.push(next);
                consecutive_errors = 0;
                (label, name, pre + 1, result)
            }
            Err(e) => {
                consecutive_errors += 1;
                (String::new(), String::new(), pre, ActionResult::failure(&e))
            }
        };
        memory.history.push(HistoryEntry {
            step: step_id,
            control_label: label.clone(),
            control_name: name.clone(),
            function: action.function.clone(),
            args: action.args.clone(),
            status: action.status,
            result: result.clone(),
        });
        memory.previous_plan = plan.get(step_id..).map(<[String]>::to_vec).unwrap_or_default();
        let finish = action.status == Status::Finish;
        steps.push(TrajectoryStep { step_no: step_id, action, control_label: label, control_name: name, pre, post, result });
        step_seconds.push(clock.seconds_since(started));
        if finish {
            outcome = Outcome::Finished;
            break;
        }
        if consecutive_errors >= MAX_CONSECUTIVE_ERRORS {
            outcome = Outcome::Error;
            break;
        }
    }
    let final_status = match (steps.is_empty(), outcome) {
        (true, _) => FinalStatus::Discarded,
        (false, Outcome::Finished) => FinalStatus::Success,
        _ => FinalStatus::ExecError,
    };
    let canvas_diff = diff_canvas(&snapshots[0].canvas, &snapshots[snapshots.len() - 1].canvas);
    let trajectory = Trajectory {
        task_id: task_id.to_string(),
        origin: InstantiatedTask {
            origin_task_id: task_id.to_string(),
            instantiated_task: task.to_string(),
            template_id: template_id.to_string(),
            thought: String::new(),
            actions: steps.iter().map(|s| s.action.clone()).collect(),
        },
        snapshots,
        steps,
        final_status,
        canvas_diff,
    };
    let total_seconds = step_seconds.iter().sum();
    Ok(RunRecord { task: task.to_string(), trajectory, outcome, step_seconds, total_seconds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataflow::execute::execute_trajectory;
    use crate::dataflow::schema::validate_input;
    use crate::env_sim::Args;
    use serde_json::json;

    const TASK: &str = "Highlight the text 'Test For Fun'";

    fn expert() -> Vec<ActionCall> {
        let args: Args = serde_json::from_value(json!({ "text": "Test For Fun" })).unwrap();
        vec![
            ActionCall::new("Select the target text", "", "select_text", args),
            ActionCall::new("Click Highlight", "Highlight", "click_input", Args::new()),
        ]
    }

    fn run(policy: &dyn Policy, max_steps: usize) -> RunRecord {
        run_task(policy, &FixedClock(0.5), &AgentConfig { max_steps }, "t", "text_page", TASK).unwrap()
    }

    #[test]
    fn scripted_replay_matches_offline_execution() {
        let rec = run(&ScriptedPolicy { actions: expert() }, 20);
        assert_eq!(rec.outcome, Outcome::Finished);
        let offline = execute_trajectory(&InstantiatedTask {
            origin_task_id: "t".into(),
            instantiated_task: TASK.into(),
            template_id: "text_page".into(),
            thought: String::new(),
            actions: expert(),
        })
        .unwrap();
        assert_eq!(rec.trajectory.final_snapshot(), offline.final_snapshot());
        assert_eq!(rec.step_seconds, [0.5, 0.5]);
    }

    #[test]
    fn pure_finish_ends_without_mutation() {
        let rec = run(&ScriptedPolicy { actions: vec![] }, 20);
        assert_eq!(rec.outcome, Outcome::Finished);
        assert_eq!(rec.steps(), 0);
        assert_eq!(rec.trajectory.final_status, FinalStatus::Discarded);
    }

    #[test]
    fn unknown_control_is_remembered_and_errors_abort() {
        let bad = ActionCall::new("x", "Nonexistent", "click_input", Args::new());
        struct Stubborn(ActionCall);
        impl Policy for Stubborn {
            fn plan(&self, _: &str) -> Vec<String> {
                vec![]
            }
            fn act(&self, _: &AgentState, _: &str) -> ActionCall {
                self.0.clone()
            }
        }
        let rec = run(&Stubborn(bad), 20);
        assert_eq!(rec.outcome, Outcome::Error);
        assert_eq!(rec.steps(), MAX_CONSECUTIVE_ERRORS);
        assert_eq!(rec.trajectory.steps[0].result.error.as_deref(), Some("UnknownControl"));
    }

    #[test]
    fn zero_policy_never_finishes() {
        let p = LearnedPolicy { params: ModelParams::default(), mode: SelectMode::Argmax };
        let rec = run(&p, 7);
        assert_eq!(rec.outcome, Outcome::MaxStepsExceeded);
        assert_eq!(rec.steps(), 7);
        let again = run(&p, 7);
        assert_eq!(rec.trajectory, again.trajectory);
    }

    #[test]
    fn state_has_record_input_shape() {
        let snap = templates::load_template("text_page").unwrap();
        let state = observe(&snap, TASK, &Memory::default(), 1);
        assert!(state.previous_actions.is_empty() && state.previous_plan.is_empty());
        assert_eq!(state.observations.controls, snap.list_controls());
        validate_input(&serde_json::to_value(state.to_record_input()).unwrap()).unwrap();
    }
}
