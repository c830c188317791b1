mod common;

use common::random_params;
use lam_core::agent::{run_task, AgentConfig, FixedClock, LearnedPolicy, Outcome, Policy, ScriptedPolicy};
use lam_core::dataflow::schema::validate_input;
use lam_core::dataflow::{execute_trajectory, FinalStatus, InstantiatedTask};
use lam_core::env_sim::{ActionCall, Status};
use lam_core::policy::{AgentState, SelectMode};
use lam_core::suite::suite_tasks;
use proptest::prelude::*;
use std::sync::Mutex;

/// Wraps a policy and keeps every state it is shown.
struct Recording<P> {
    inner: P,
    seen: Mutex<Vec<AgentState>>,
}

impl<P: Policy> Policy for Recording<P> {
    fn plan(&self, task: &str) -> Vec<String> {
        self.inner.plan(task)
    }

    fn act(&self, state: &AgentState, step: &str) -> ActionCall {
        self.seen.lock().unwrap().push(state.clone());
        self.inner.act(state, step)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn runs_terminate_and_memory_tracks_steps(seed in any::<u64>(), max_steps in 1usize..12, task_ix in 0usize..50) {
        let task = &suite_tasks()[task_ix];
        let policy = Recording {
            inner: LearnedPolicy { params: random_params(seed, 1.0), mode: SelectMode::Sample { seed, temperature: 1.0 } },
            seen: Mutex::new(Vec::new()),
        };
        let cfg = AgentConfig { max_steps };
        let run = run_task(&policy, &FixedClock(0.5), &cfg, &task.task_id, &task.template_id, &task.task).unwrap();
        prop_assert!(run.steps() <= max_steps);
        prop_assert_eq!(run.step_seconds.len(), run.steps());
        match run.outcome {
            Outcome::MaxStepsExceeded => prop_assert_eq!(run.steps(), max_steps),
            Outcome::Error => prop_assert!(run.trajectory.steps.iter().rev().take(3).all(|s| !s.result.ok)),
            Outcome::Finished => {}
        }
        let seen = policy.seen.into_inner().unwrap();
        for (i, state) in seen.iter().enumerate() {
            // History holds exactly the steps executed before this one.
            prop_assert_eq!(state.step_id, i + 1);
            prop_assert_eq!(state.previous_actions.len(), i);
            if i > 0 {
                prop_assert_eq!(&state.previous_actions[..i - 1], &seen[i - 1].previous_actions[..]);
            }
            let input = serde_json::to_value(state.to_record_input()).unwrap();
            prop_assert!(validate_input(&input).is_ok());
        }
        let expected_status = match (run.steps(), run.outcome) {
            (0, _) => FinalStatus::Discarded,
            (_, Outcome::Finished) => FinalStatus::Success,
            _ => FinalStatus::ExecError,
        };
        prop_assert_eq!(run.trajectory.final_status, expected_status);
    }
}

#[test]
fn scripted_replays_match_offline_execution() {
    for task in suite_tasks().iter().filter(|t| t.expert) {
        let run = run_task(
            &ScriptedPolicy { actions: task.demo.clone() },
            &FixedClock(0.0),
            &AgentConfig::default(),
            &task.task_id,
            &task.template_id,
            &task.task,
        )
        .unwrap();
        let offline = execute_trajectory(&InstantiatedTask {
            origin_task_id: task.task_id.clone(),
            instantiated_task: task.task.clone(),
            template_id: task.template_id.clone(),
            thought: String::new(),
            actions: task.demo.clone(),
        })
        .unwrap();
        assert_eq!(run.outcome, Outcome::Finished, "{}", task.task_id);
        assert_eq!(run.trajectory.snapshots.last().unwrap().to_json(), offline.snapshots.last().unwrap().to_json());
        assert_eq!(run.trajectory.steps.last().unwrap().action.status, Status::Finish);
    }
}
