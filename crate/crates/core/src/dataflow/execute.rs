use super::records::{EvaluationVerdict, FinalStatus, InstantiatedTask, Trajectory, TrajectoryStep};
use super::DataflowError;
use crate::env_sim::{diff_canvas, registry, templates, ActionCall, ActionResult, CanvasState, EnvError, EnvSnapshot};
use crate::oracle::{str_field, Oracle, OracleError, OracleRequest, PromptId};
use serde_json::json;

/// Label and text of the control an action targets, or empty strings for target-free calls.
pub fn grounded_control(snap: &EnvSnapshot, action: &ActionCall) -> Result<(String, String), EnvError> {
    match registry::lookup(&action.function) {
        Some(spec) if spec.needs_control => {
            let label = Some(action.control_label.as_str()).filter(|l| !l.is_empty());
            let text = Some(action.control_text.as_str()).filter(|t| !t.is_empty());
            let (_, node) = snap.resolve_control(label, text)?;
            Ok((node.label.clone(), node.control_text.clone()))
        }
        _ => Ok((String::new(), String::new())),
    }
}

/// Runs the actions from the template's start state, stopping at the first error.
pub fn execute_trajectory(inst: &InstantiatedTask) -> Result<Trajectory, DataflowError> {
    let initial = templates::load_template(&inst.template_id)?;
    let mut snapshots = vec![initial];
    let mut steps = Vec::new();
    let mut final_status = if inst.actions.is_empty() { FinalStatus::Discarded } else { FinalStatus::Success };
    for (i, action) in inst.actions.iter().enumerate() {
        let pre = snapshots.len() - 1;
        let snap = &snapshots[pre];
        let outcome = grounded_control(snap, action)
            .and_then(|ctrl| snap.apply_action(action).map(|(next, result)| (ctrl, next, result)));
        match outcome {
            Ok(((label, name), next, result)) => {
                snapshots.push(next);
                steps.push(TrajectoryStep {
                    step_no: i + 1,
                    action: action.clone(),
                    control_label: label,
                    control_name: name,
                    pre,
                    post: pre + 1,
                    result,
                });
            }
            Err(e) => {
                steps.push(TrajectoryStep {
                    step_no: i + 1,
                    action: action.clone(),
                    control_label: String::new(),
                    control_name: String::new(),
                    pre,
                    post: pre,
                    result: ActionResult::failure(&e),
                });
                final_status = FinalStatus::ExecError;
                break;
            }
        }
    }
    let canvas_diff = diff_canvas(&snapshots[0].canvas, &snapshots[snapshots.len() - 1].canvas);
    Ok(Trajectory {
        task_id: inst.origin_task_id.clone(),
        origin: inst.clone(),
        snapshots,
        steps,
        final_status,
        canvas_diff,
    })
}

/// Re-executes the recorded actions from the template and returns the final canvas.
pub fn replay_final_canvas(traj: &Trajectory) -> Result<CanvasState, DataflowError> {
    let mut snap = templates::load_template(&traj.origin.template_id)?;
    for step in &traj.steps {
        snap = snap.apply_action(&step.action)?.0;
    }
    Ok(snap.canvas)
}

/// The judge's view of the end state: final canvas markup, then the text renderings of the
/// first and last snapshots.
pub fn final_status_text(traj: &Trajectory) -> String {
    format!(
        "{}\n<Initial View:>\n{}\n<Final View:>\n{}",
        traj.final_snapshot().canvas.to_markup(),
        traj.initial().rendered_view,
        traj.final_snapshot().rendered_view
    )
}

pub fn judge_request(traj: &Trajectory) -> OracleRequest {
    let items: Vec<_> = traj
        .steps
        .iter()
        .map(|s| json!({ "number": s.step_no, "action": s.action, "result": s.result }))
        .collect();
    OracleRequest::new(PromptId::Evaluate)
        .with("apis", registry::describe_apis())
        .with("request", traj.origin.instantiated_task.clone())
        .with("thought", traj.origin.thought.clone())
        .with("trajectory", serde_json::to_string(&items).expect("steps serialize"))
        .with("canvas_diff", serde_json::to_string(&traj.canvas_diff).expect("diff serializes"))
        .with("init_control_state", traj.initial().control_tree_json().to_string())
        .with("final_control_state", traj.final_snapshot().control_tree_json().to_string())
        .with("final_status", final_status_text(traj))
}

pub fn judge_trajectory(traj: &Trajectory, oracle: &dyn Oracle) -> Result<EvaluationVerdict, DataflowError> {
    if traj.final_status != FinalStatus::Success {
        return Err(DataflowError::Validation(format!("{} did not execute successfully", traj.task_id)));
    }
    let reply = oracle.complete(&judge_request(traj))?;
    fn enum_field<T: serde::de::DeserializeOwned>(parsed: &serde_json::Value, key: &str) -> Result<T, OracleError> {
        serde_json::from_value(parsed[key].clone()).map_err(|e| OracleError::MalformedResponse(format!("{key}: {e}")))
    }
    Ok(EvaluationVerdict {
        task_id: traj.task_id.clone(),
        task_complete: enum_field(&reply.parsed, "task_complete")?,
        task_quality: enum_field(&reply.parsed, "task_quality")?,
        complete_judgement: str_field(&reply.parsed, "complete_judgement")?.to_string(),
        quality_judgement: str_field(&reply.parsed, "quality_judgement")?.to_string(),
    })
}
