//! Deterministic keyword-rule provider. Every reply is a pure function of the request's
//! substitutions, so pipelines run offline and reproducibly.

use super::{Generation, Message, Oracle, OracleError, OracleRequest, PromptId};
use crate::env_sim::{ActionCall, CanvasState, DiffEntry};
use crate::goals::{expert_actions, TaskGoal};
use crate::ops::{self, Operation, FONT_COLORS};
use crate::text;
use serde::Deserialize;
use serde_json::{json, Value};

/// Extra work the evolver can append, tried in order starting at the request's variant.
const EVOLUTIONS: &[(Operation, &str)] = &[
    (Operation::Bold, "and make it bold"),
    (Operation::Highlight, "and highlight it"),
    (Operation::PageBorder, "and add a page border"),
    (Operation::FontColor, "and change its font color to red"),
    (Operation::Chart, "and insert a chart"),
    (Operation::Table, "and insert a table"),
];

const DETAIL_CUES: &[&str] = &["click", "step", "then", "first", "next", "finally", "button", "tab"];

#[derive(Debug, Clone, Default)]
pub struct RuleOracle;

impl RuleOracle {
    pub fn new() -> Self {
        Self
    }
}

impl Oracle for RuleOracle {
    fn name(&self) -> &str {
        "rule-mock"
    }

    fn generate(&self, request: &OracleRequest, _messages: &[Message]) -> Result<Generation, OracleError> {
        let reply = match request.template {
            PromptId::Instantiate => instantiate(request),
            PromptId::Evaluate => evaluate(request),
            PromptId::PlanEval => plan_eval(request),
            PromptId::Evolve => evolve(request),
            PromptId::Action => json!({
                "thought": "Nothing left to do.",
                "control_label": "",
                "control_name": "",
                "function": "",
                "args": {},
                "status": "FINISH",
                "plan": []
            }),
        };
        Ok(Generation { text: serde_json::to_string(&reply).expect("json value"), attempts: 1 })
    }
}

fn instantiate(req: &OracleRequest) -> Value {
    let task = req.sub("given_task");
    let canvas = CanvasState::from_markup(req.sub("doc_canvas_state")).ok();
    let goal = TaskGoal::from_task(task);
    let texts: Vec<String> = canvas
        .as_ref()
        .map(|c| c.runs().map(|(_, r)| r.text.clone()).collect())
        .unwrap_or_default();
    let target = goal
        .target
        .clone()
        .filter(|t| texts.iter().any(|r| r.contains(t.as_str())))
        .or_else(|| texts.first().cloned());
    let needs_target = goal.ops.iter().any(|op| op.needs_selection());

    if goal.ops.is_empty() || (needs_target && target.is_none()) {
        return json!({
            "observation": format!("The document has {} text runs.", texts.len()),
            "thought": "No available action matches the task.",
            "new_task": task,
            "actions_plan": ""
        });
    }
    let target = target.unwrap_or_default();
    let new_task = concrete_task(&goal, &target);
    let concrete = TaskGoal::from_task(&new_task);
    let plan: Vec<String> = expert_actions(&concrete, &target)
        .iter()
        .map(|a| serde_json::to_string(a).expect("action serializes"))
        .collect();
    json!({
        "observation": format!("The document has {} text runs; the first is '{}'.", texts.len(), texts.first().cloned().unwrap_or_default()),
        "thought": format!("Apply {} using the ribbon and API calls.", goal.ops.iter().map(|o| o.as_str()).collect::<Vec<_>>().join(", ")),
        "new_task": new_task,
        "actions_plan": plan.join("\n")
    })
}

/// The task restated with concrete target text and parameters.
fn concrete_task(goal: &TaskGoal, target: &str) -> String {
    let clauses: Vec<String> = goal
        .ops
        .iter()
        .map(|op| match op {
            Operation::Highlight => format!("highlight the text '{target}'"),
            Operation::Bold => format!("make the text '{target}' bold"),
            Operation::FontSize => format!("change the font size of '{target}' to {}", goal.font_size.map_or(14, |h| h / 2)),
            Operation::FontColor => {
                let name = goal
                    .color
                    .as_deref()
                    .and_then(|hex| FONT_COLORS.iter().find(|(_, h)| *h == hex).map(|(n, _)| *n))
                    .unwrap_or("red");
                format!("change the font color of '{target}' to {name}")
            }
            Operation::PageBorder => format!("add a {} page border", goal.border_style.as_deref().unwrap_or("box")),
            Operation::Table => {
                let (r, c) = goal.table_dims.unwrap_or((3, 3));
                format!("insert a {r}x{c} table")
            }
            Operation::Chart => "insert a chart".to_string(),
            Operation::Shape => "insert a rectangle shape".to_string(),
            Operation::Picture => "insert a picture".to_string(),
            Operation::Comment => format!("add a comment on '{target}'"),
        })
        .collect();
    let joined = match clauses.len() {
        1 => clauses[0].clone(),
        n => format!("{} and {}", clauses[..n - 1].join(", "), clauses[n - 1]),
    };
    let mut chars = joined.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => joined,
    }
}

#[derive(Deserialize)]
struct TrajectoryItem {
    #[allow(dead_code)]
    number: usize,
    action: ActionCall,
}

fn evaluate(req: &OracleRequest) -> Value {
    let task = req.sub("request");
    let (quality, quality_why) = task_quality(task);
    let verdict = |complete: &str, why: String| {
        json!({
            "task_quality": quality,
            "task_complete": complete,
            "complete_judgement": why,
            "quality_judgement": quality_why
        })
    };
    let Ok(items) = serde_json::from_str::<Vec<TrajectoryItem>>(req.sub("trajectory")) else {
        return verdict("unsure", "The execution trajectory could not be read.".into());
    };
    if items.is_empty() {
        return verdict("no", "No action was taken.".into());
    }
    if let Some(item) = items.iter().find(|i| i.action.is_empty()) {
        return verdict("no", format!("Action {} is empty.", item.number));
    }
    let goal = TaskGoal::from_task(task);
    if goal.ops.is_empty() {
        return verdict("unsure", "The request names no recognizable document change.".into());
    }
    let diff: Vec<DiffEntry> = serde_json::from_str(req.sub("canvas_diff")).unwrap_or_default();
    let status = req.sub("final_status");
    let markup_end = status.find("</canvas>").map(|i| i + "</canvas>\n".len()).unwrap_or(0);
    let Ok(canvas) = CanvasState::from_markup(&status[..markup_end.min(status.len())]) else {
        return verdict("unsure", "The final canvas could not be read.".into());
    };
    let checks = goal.check(&canvas, &diff);
    let missing: Vec<&str> = checks.iter().filter(|(_, ok)| !ok).map(|(op, _)| op.as_str()).collect();
    if missing.is_empty() {
        let done: Vec<&str> = checks.iter().map(|(op, _)| op.as_str()).collect();
        verdict("yes", format!("The final canvas shows the requested change ({}).", done.join(", ")))
    } else {
        verdict("no", format!("The final canvas lacks: {}.", missing.join(", ")))
    }
}

fn task_quality(task: &str) -> (&'static str, String) {
    let words: Vec<String> = text::without_quotes(task)
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect();
    if words.iter().any(|w| w == "select" || w == "selection" || w == "selected") {
        return ("ambiguous", "The request relies on a selection the user cannot see.".into());
    }
    let cues = words.iter().filter(|w| DETAIL_CUES.contains(&w.as_str())).count();
    if cues >= 2 || words.iter().any(|w| w == "step") {
        return ("over-detailed", "The request spells out individual UI steps.".into());
    }
    ("good", "The request is clear and states a goal.".into())
}

fn plan_lines(answer: &str) -> Vec<String> {
    answer
        .lines()
        .map(|l| l.trim().trim_start_matches(|c: char| c.is_ascii_digit() || c == '.' || c == '-' || c == ')').trim())
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}

fn plan_eval(req: &OracleRequest) -> Value {
    let a = plan_lines(req.sub("answer1"));
    let b = plan_lines(req.sub("answer2"));
    let mut used = vec![false; b.len()];
    let mut similar = Vec::new();
    for step in &a {
        if let Some(j) = (0..b.len()).find(|&j| !used[j] && text::normalize(&b[j]) == text::normalize(step)) {
            used[j] = true;
            similar.push(format!("{step} / {}", b[j]));
        }
    }
    let solves = |n: usize, total: usize| if total > 0 && n as f64 / total as f64 >= 0.8 { "Yes" } else { "No" };
    let more_helpful = if 2 * similar.len() >= b.len() { "1" } else { "2" };
    json!({
        "Subtask1": solves(similar.len(), b.len()),
        "Subtask2": if b.is_empty() { "No" } else { "Yes" },
        "Subtask3": {
            "Action items in Answer1": a,
            "Action items in Answer2": b,
            "Similar action items": similar,
            "Count of similar action items": similar.len()
        },
        "Subtask4": {
            "More helpful assistant": more_helpful,
            "Reason": "Chosen by the share of steps that match the reference."
        }
    })
}

fn evolve(req: &OracleRequest) -> Value {
    let task = req.sub("task").trim();
    let plan: Vec<String> = serde_json::from_str(req.sub("plan")).unwrap_or_default();
    let variant: usize = req.sub("variant").parse().unwrap_or(0);
    let present = ops::requested(task);
    let options: Vec<&(Operation, &str)> = EVOLUTIONS.iter().filter(|(op, _)| !present.contains(op)).collect();
    if options.is_empty() {
        return json!({ "task": task, "plan": plan });
    }
    let (op, clause) = options[variant % options.len()];
    let mut new_plan = plan;
    if matches!(op.tab(), "Insert" | "Review") && !matches!(op, Operation::Table) {
        new_plan.push(ops::open_tab_step(op.tab()));
    }
    new_plan.push(op.step_description().to_string());
    json!({
        "task": format!("{} {clause}", task.trim_end_matches('.')),
        "plan": new_plan
    })
}
