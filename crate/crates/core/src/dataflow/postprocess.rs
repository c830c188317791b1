use super::records::{
    thought_for, EvaluationVerdict, HistoryEntry, RecordInput, RecordOutput, TaskComplete, TrainingRecord, Trajectory,
};
use crate::env_sim::Status;

fn history_entry(traj: &Trajectory, k: usize) -> HistoryEntry {
    let s = &traj.steps[k];
    HistoryEntry {
        step: s.step_no,
        control_label: s.control_label.clone(),
        control_name: s.control_name.clone(),
        function: s.action.function.clone(),
        args: s.action.args.clone(),
        status: if k + 1 == traj.steps.len() { Status::Finish } else { Status::Continue },
        result: s.result.clone(),
    }
}

/// Records for a trajectory the judge accepted; nothing otherwise.
pub fn postprocess(traj: &Trajectory, verdict: &EvaluationVerdict) -> Vec<TrainingRecord> {
    if verdict.task_complete != TaskComplete::Yes {
        return Vec::new();
    }
    trajectory_records(traj)
}

/// One record per step, whatever the verdict. The plan emitted at step k lists the step
/// descriptions still to come, so the previous plan at step k is what step k-1 emitted.
pub fn trajectory_records(traj: &Trajectory) -> Vec<TrainingRecord> {
    let n = traj.steps.len();
    let remaining = |k: usize| -> Vec<String> { traj.steps[k + 1..].iter().map(|s| s.action.step.clone()).collect() };
    (0..n)
        .map(|k| {
            let step = &traj.steps[k];
            let status = if k + 1 == n { Status::Finish } else { Status::Continue };
            TrainingRecord {
                task_id: traj.task_id.clone(),
                step: step.step_no,
                input: RecordInput {
                    available_controls: traj.snapshots[step.pre].list_controls(),
                    user_request: traj.origin.instantiated_task.clone(),
                    step_history: (0..k).map(|j| history_entry(traj, j)).collect(),
                    previous_plan: if k == 0 { Vec::new() } else { remaining(k - 1) },
                },
                output: RecordOutput {
                    thought: thought_for(&step.action.step, &step.action.function, &step.control_name, status),
                    control_label: step.control_label.clone(),
                    control_name: step.control_name.clone(),
                    function: step.action.function.clone(),
                    args: step.action.args.clone(),
                    status,
                    plan: remaining(k),
                },
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataflow::execute::execute_trajectory;
    use crate::dataflow::records::{InstantiatedTask, TaskQuality};
    use crate::dataflow::schema::validate_record;
    use crate::env_sim::{ActionCall, Args};
    use serde_json::json;

    fn traj(actions: Vec<ActionCall>) -> Trajectory {
        execute_trajectory(&InstantiatedTask {
            origin_task_id: "t".into(),
            instantiated_task: "Highlight the text 'Test For Fun'".into(),
            template_id: "text_page".into(),
            thought: String::new(),
            actions,
        })
        .unwrap()
    }

    fn yes() -> EvaluationVerdict {
        EvaluationVerdict {
            task_id: "t".into(),
            task_complete: TaskComplete::Yes,
            task_quality: TaskQuality::Good,
            complete_judgement: String::new(),
            quality_judgement: String::new(),
        }
    }

    fn select() -> ActionCall {
        ActionCall::new("Select the target text", "", "select_text", serde_json::from_value(json!({"text": "Test For Fun"})).unwrap())
    }

    #[test]
    fn three_steps_three_records() {
        let t = traj(vec![select(), ActionCall::new("Bold it", "Bold", "click_input", Args::new()), ActionCall::new("Highlight it", "Highlight", "click_input", Args::new())]);
        let recs = postprocess(&t, &yes());
        assert_eq!(recs.len(), 3);
        assert_eq!(recs[1].input.step_history.len(), 1);
        assert!(recs[0].input.previous_plan.is_empty());
        assert_eq!(recs[0].output.plan, ["Bold it", "Highlight it"]);
        assert_eq!(recs[1].input.previous_plan, recs[0].output.plan);
        assert_eq!(recs[2].output.status, Status::Finish);
        assert!(recs[2].output.plan.is_empty());
        assert_eq!(recs[2].output.control_name, "Text Highlight Color");
        for r in &recs {
            validate_record(r).unwrap();
        }
    }

    #[test]
    fn single_step_finishes() {
        let recs = postprocess(&traj(vec![select()]), &yes());
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].output.status, Status::Finish);
    }

    #[test]
    fn rejected_verdict_yields_nothing() {
        let v = EvaluationVerdict { task_complete: TaskComplete::No, ..yes() };
        assert!(postprocess(&traj(vec![select()]), &v).is_empty());
    }
}
