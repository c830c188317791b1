//! A bundled 50-task benchmark on the text page: 35 tasks with correct demonstrations and
//! 15 whose demonstrations go wrong, written out in the corpus file layout so training
//! reads it like pipeline output.

use crate::agent::{run_task, AgentConfig, FixedClock, LearnedPolicy, RunRecord};
use crate::dataflow::pipeline::{INSTANTIATED_FILE, TASKPLAN_FILE, TRAINING_FILE, TRAJECTORIES_FILE, VERDICTS_FILE};
use crate::dataflow::{
    execute_trajectory, judge_trajectory, postprocess, DataflowError, EvaluationVerdict, FinalStatus, InstantiatedTask,
    Source, TaskPlanRecord, TrainingRecord, Trajectory,
};
use crate::env_sim::{ActionCall, Args, EnvError};
use crate::goals::{expert_actions, TaskGoal};
use crate::io;
use crate::oracle::Oracle;
use crate::policy::{ModelParams, SelectMode};
use rayon::prelude::*;
use serde_json::json;
use std::path::Path;

pub const SUITE_TEMPLATE: &str = "text_page";
const TARGETS: [&str; 6] =
    ["Test For Fun", "Quarterly Report", "Meeting Notes", "Action Items", "Summary of Results", "Project Timeline"];

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteTask {
    pub task_id: String,
    pub template_id: String,
    pub task: String,
    /// What the demonstrator did.
    pub demo: Vec<ActionCall>,
    /// Whether the demonstration is correct.
    pub expert: bool,
}

impl SuiteTask {
    /// Correct plan: the step descriptions of a correct demonstration.
    pub fn plan(&self) -> Vec<String> {
        let goal = TaskGoal::from_task(&self.task);
        expert_actions(&goal, goal.target.as_deref().unwrap_or_default()).into_iter().map(|a| a.step).collect()
    }
}

fn target(i: usize) -> &'static str {
    TARGETS[i % TARGETS.len()]
}

fn correct(task: &str) -> Vec<ActionCall> {
    let goal = TaskGoal::from_task(task);
    expert_actions(&goal, goal.target.as_deref().unwrap_or_default())
}

fn args(v: serde_json::Value) -> Args {
    serde_json::from_value(v).expect("object literal")
}

/// Task wordings; every one names the page or its text so template matching finds it.
fn tasks() -> Vec<(String, bool, Vec<ActionCall>)> {
    let mut out: Vec<(String, bool, Vec<ActionCall>)> = Vec::new();
    let mut push_expert = |task: String| {
        let demo = correct(&task);
        out.push((task, true, demo));
    };
    let highlight = ["Highlight the text '{}' on the page", "Please highlight the text '{}'", "Highlight '{}' in the page text"];
    for i in 0..6 {
        push_expert(highlight[i % 3].replace("{}", target(i)));
    }
    let bold = ["Make the text '{}' bold", "Bold the text '{}' on the page", "Set the text '{}' in bold"];
    for i in 0..6 {
        push_expert(bold[i % 3].replace("{}", target(i + 1)));
    }
    for (i, size) in [16, 18, 20, 14, 28].iter().enumerate() {
        push_expert(format!("Change the font size of the text '{}' to {size}", target(i + 2)));
    }
    for (i, color) in ["red", "blue", "green", "orange", "purple"].iter().enumerate() {
        push_expert(format!("Change the font color of the text '{}' to {color}", target(i + 3)));
    }
    for i in 0..4 {
        push_expert(format!("Highlight the text '{}' and make it bold", target(i + 4)));
    }
    for style in ["box", "shadow", "double"] {
        push_expert(format!("Add a {style} page border to the text page"));
    }
    for (r, c) in [(2, 3), (3, 4), (4, 2)] {
        push_expert(format!("Insert a {r}x{c} table into the text page"));
    }
    for w in ["Insert a chart below the text on the page", "Add a chart to the text page", "Put a chart on the page with the text"] {
        push_expert(w.to_string());
    }
    // Flawed demonstrations.
    for w in [
        "Insert a rectangle shape into the text page",
        "Add a shape to the page with the text",
        "Put a rectangle shape on the text page",
        "Add a rectangle shape below the page text",
    ] {
        // The Insert tab is never opened, so the button is disabled.
        out.push((w.to_string(), false, vec![ActionCall::new("Insert a rectangle shape", "Shapes", "click_input", Args::new())]));
    }
    for i in 0..4 {
        let task = format!("Add a comment to the text '{}'", target(i));
        // Nothing is selected when the comment button is pressed.
        let demo = vec![
            ActionCall::new("Open the Review tab", "Review", "click_input", Args::new()),
            ActionCall::new("Add a comment", "New Comment", "click_input", Args::new()),
        ];
        out.push((task, false, demo));
    }
    for (i, (size, color)) in [(16, "red"), (20, "blue"), (18, "green"), (14, "purple")].iter().enumerate() {
        let task = format!("Change the font size of the text '{}' to {size} and the font color to {color}", target(i + 1));
        // The color change is forgotten.
        let demo: Vec<ActionCall> = correct(&task).into_iter().filter(|a| a.function != "set_font_color").collect();
        out.push((task, false, demo));
    }
    for (i, size) in [22, 12, 26].iter().enumerate() {
        let task = format!("Make the text '{}' bold and set its font size to {size}", target(i + 2));
        // The size is picked from the wrong entry.
        let demo = correct(&task)
            .into_iter()
            .map(|a| if a.function == "select_option" { ActionCall { args: args(json!({ "option": "11" })), ..a } } else { a })
            .collect();
        out.push((task, false, demo));
    }
    out
}

pub fn suite_tasks() -> Vec<SuiteTask> {
    tasks()
        .into_iter()
        .enumerate()
        .map(|(i, (task, expert, demo))| SuiteTask {
            task_id: format!("suite_{:02}", i + 1),
            template_id: SUITE_TEMPLATE.into(),
            task,
            demo,
            expert,
        })
        .collect()
}

/// The suite in corpus form.
#[derive(Debug, Clone)]
pub struct SuiteCorpus {
    pub task_plans: Vec<TaskPlanRecord>,
    pub instantiated: Vec<InstantiatedTask>,
    pub trajectories: Vec<Trajectory>,
    pub verdicts: Vec<EvaluationVerdict>,
    pub training: Vec<TrainingRecord>,
}

pub fn build_corpus(oracle: &dyn Oracle) -> Result<SuiteCorpus, DataflowError> {
    let tasks = suite_tasks();
    let task_plans =
        tasks.iter().map(|t| TaskPlanRecord { task_id: t.task_id.clone(), task: t.task.clone(), plan: t.plan(), source: Source::Doc }).collect();
    let instantiated: Vec<InstantiatedTask> = tasks
        .iter()
        .map(|t| InstantiatedTask {
            origin_task_id: t.task_id.clone(),
            instantiated_task: t.task.clone(),
            template_id: t.template_id.clone(),
            thought: String::new(),
            actions: t.demo.clone(),
        })
        .collect();
    let trajectories = instantiated.par_iter().map(execute_trajectory).collect::<Result<Vec<_>, _>>()?;
    let verdicts = trajectories
        .par_iter()
        .filter(|t| t.final_status == FinalStatus::Success)
        .map(|t| judge_trajectory(t, oracle))
        .collect::<Result<Vec<_>, _>>()?;
    let training = trajectories
        .iter()
        .filter_map(|t| verdicts.iter().find(|v| v.task_id == t.task_id).map(|v| postprocess(t, v)))
        .flatten()
        .collect();
    Ok(SuiteCorpus { task_plans, instantiated, trajectories, verdicts, training })
}

pub fn write_corpus(dir: &Path, corpus: &SuiteCorpus) -> Result<(), DataflowError> {
    io::write_jsonl(&dir.join(TASKPLAN_FILE), &corpus.task_plans)?;
    io::write_jsonl(&dir.join(INSTANTIATED_FILE), &corpus.instantiated)?;
    io::write_jsonl(&dir.join(TRAJECTORIES_FILE), &corpus.trajectories)?;
    io::write_jsonl(&dir.join(VERDICTS_FILE), &corpus.verdicts)?;
    io::write_jsonl(&dir.join(TRAINING_FILE), &corpus.training)?;
    Ok(())
}

/// Greedy runs of `params` over every suite task, with zero-duration steps.
pub fn run_suite(params: &ModelParams, cfg: &AgentConfig) -> Result<Vec<RunRecord>, EnvError> {
    let policy = LearnedPolicy { params: params.clone(), mode: SelectMode::Argmax };
    suite_tasks()
        .par_iter()
        .map(|t| run_task(&policy, &FixedClock(0.0), cfg, &t.task_id, &t.template_id, &t.task))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataflow::TaskComplete;
    use crate::oracle::RuleOracle;

    #[test]
    fn thirty_five_demonstrations_succeed_and_fifteen_fail() {
        let c = build_corpus(&RuleOracle).unwrap();
        assert_eq!(c.task_plans.len(), 50);
        let yes: Vec<&str> =
            c.verdicts.iter().filter(|v| v.task_complete == TaskComplete::Yes).map(|v| v.task_id.as_str()).collect();
        let tasks = suite_tasks();
        assert_eq!(yes.len(), 35);
        for t in &tasks {
            assert_eq!(yes.contains(&t.task_id.as_str()), t.expert, "{}: {}", t.task_id, t.task);
        }
    }
}
