//! The finite action space of a state: listed controls crossed with the functions their
//! type supports, target-free API calls with arguments read off the task, and a pure
//! FINISH.

use super::state::AgentState;
use crate::env_sim::{registry, ActionCall, Args, ControlType, ControlView, Status};
use crate::ops::{BORDER_STYLES, FONT_COLORS, HIGHLIGHT_COLORS};
use crate::text;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateAction {
    /// `None` for target-free calls and for the pure FINISH.
    pub control: Option<ControlView>,
    /// Empty for the pure FINISH.
    pub function: String,
    /// Canonical arguments (defaults filled in).
    pub args: Args,
    /// Whether any argument value was read off the task text.
    pub task_args: bool,
}

impl CandidateAction {
    pub fn finish() -> Self {
        Self { control: None, function: String::new(), args: Args::new(), task_args: false }
    }

    pub fn is_finish(&self) -> bool {
        self.function.is_empty()
    }

    pub fn control_text(&self) -> &str {
        self.control.as_ref().map_or("", |c| c.control_text.as_str())
    }

    pub fn control_label(&self) -> &str {
        self.control.as_ref().map_or("", |c| c.label.as_str())
    }

    pub fn to_action(&self, step: &str, status: Status) -> ActionCall {
        if self.is_finish() {
            return ActionCall::finish(step);
        }
        ActionCall {
            step: step.to_string(),
            control_label: self.control_label().to_string(),
            control_text: self.control_text().to_string(),
            function: self.function.clone(),
            args: self.args.clone(),
            status,
        }
    }

    /// Whether this candidate is the action described by the given fields. An empty label
    /// matches any; arguments are compared after filling defaults.
    pub fn matches(&self, control_label: &str, control_name: &str, function: &str, args: &Args) -> bool {
        if self.is_finish() || function.is_empty() {
            return self.is_finish() && function.is_empty();
        }
        self.function == function
            && self.control_text() == control_name
            && (control_label.is_empty() || self.control_label() == control_label)
            && registry::canonical_args(function, args).is_ok_and(|a| a == self.args)
    }
}

/// Argument values a task makes available.
#[derive(Debug, Clone, Default)]
pub struct TaskArgs {
    pub quoted: Vec<String>,
    /// Font sizes in points.
    pub sizes: Vec<u32>,
    pub font_colors: Vec<String>,
    pub highlight_colors: Vec<String>,
    pub styles: Vec<String>,
    pub dims: Vec<(u32, u32)>,
}

impl TaskArgs {
    pub fn from_task(task: &str) -> Self {
        let dims = text::dimensions(task);
        let tokens = text::tokenize(&text::without_quotes(task));
        let pick = |names: &[&str]| -> Vec<String> {
            tokens.iter().filter(|t| names.contains(&t.as_str())).fold(Vec::new(), |mut acc, t| {
                if !acc.contains(t) {
                    acc.push(t.clone());
                }
                acc
            })
        };
        let color_names: Vec<&str> = FONT_COLORS.iter().map(|(n, _)| *n).collect();
        Self {
            quoted: text::quoted_spans(task),
            sizes: text::integers(task)
                .into_iter()
                .filter(|&n| (1..=409).contains(&n) && !dims.iter().any(|&(r, c)| r == n || c == n))
                .collect(),
            font_colors: pick(&color_names)
                .iter()
                .filter_map(|n| FONT_COLORS.iter().find(|(name, _)| name == n).map(|(_, hex)| hex.to_string()))
                .collect(),
            highlight_colors: pick(HIGHLIGHT_COLORS),
            styles: pick(BORDER_STYLES),
            dims,
        }
    }
}

fn args(v: Value) -> Args {
    serde_json::from_value(v).expect("object literal")
}

fn push(out: &mut Vec<CandidateAction>, control: Option<&ControlView>, function: &str, raw: Args, task_args: bool) {
    if let Ok(canonical) = registry::canonical_args(function, &raw) {
        let same = |c: &&mut CandidateAction| c.control.as_ref() == control && c.function == function && c.args == canonical;
        match out.iter_mut().find(same) {
            Some(existing) => existing.task_args |= task_args,
            None => out.push(CandidateAction { control: control.cloned(), function: function.to_string(), args: canonical, task_args }),
        }
    }
}

fn control_candidates(out: &mut Vec<CandidateAction>, control: &ControlView, ta: &TaskArgs) {
    let ctype = control.control_type;
    let c = Some(control);
    push(out, c, "click_input", Args::new(), false);
    match ctype {
        ControlType::Document | ControlType::Edit => {
            if ctype == ControlType::Edit {
                for q in &ta.quoted {
                    push(out, c, "set_edit_text", args(json!({ "text": q })), true);
                }
            }
            for q in &ta.quoted {
                push(out, c, "type_keys", args(json!({ "keys": q })), true);
            }
        }
        ControlType::ComboBox => {
            for n in &ta.sizes {
                push(out, c, "set_edit_text", args(json!({ "text": n.to_string() })), true);
            }
            for n in &ta.sizes {
                push(out, c, "select_option", args(json!({ "option": n.to_string() })), true);
            }
        }
        ControlType::ScrollBar => {
            for dir in ["down", "up"] {
                push(out, c, "scroll", args(json!({ "direction": dir })), false);
            }
        }
        _ => {}
    }
}

fn api_candidates(out: &mut Vec<CandidateAction>, ta: &TaskArgs) {
    for q in &ta.quoted {
        push(out, None, "select_text", args(json!({ "text": q })), true);
    }
    push(out, None, "toggle_highlight", Args::new(), false);
    for color in &ta.highlight_colors {
        push(out, None, "toggle_highlight", args(json!({ "color": color })), true);
    }
    for n in &ta.sizes {
        push(out, None, "set_font_size", args(json!({ "size": n * 2 })), true);
    }
    if ta.font_colors.is_empty() {
        push(out, None, "set_font_color", args(json!({ "color": "FF0000" })), false);
    }
    for color in &ta.font_colors {
        push(out, None, "set_font_color", args(json!({ "color": color })), true);
    }
    if ta.styles.is_empty() {
        push(out, None, "insert_page_border", Args::new(), false);
    }
    for style in &ta.styles {
        push(out, None, "insert_page_border", args(json!({ "style": style })), true);
    }
    if ta.dims.is_empty() {
        push(out, None, "insert_table", args(json!({ "rows": 3, "cols": 3 })), false);
    }
    for (r, c) in &ta.dims {
        push(out, None, "insert_table", args(json!({ "rows": r, "cols": c })), true);
    }
    push(out, None, "toggle_bold", Args::new(), false);
}

fn label_key(c: &CandidateAction) -> (u64, usize, String) {
    let label = c.control.as_ref().and_then(|c| c.label.parse::<u64>().ok()).unwrap_or(u64::MAX);
    let reg = registry::registry_index(&c.function).unwrap_or(usize::MAX);
    (label, reg, serde_json::to_string(&c.args).expect("args serialize"))
}

/// Candidates in tie-break order: lowest control label first (target-free calls after every
/// control), then registry order, then arguments. The pure FINISH is always last.
pub fn enumerate(state: &AgentState) -> Vec<CandidateAction> {
    let ta = TaskArgs::from_task(&state.task);
    let mut out = Vec::new();
    for c in &state.observations.controls {
        control_candidates(&mut out, c, &ta);
    }
    api_candidates(&mut out, &ta);
    out.sort_by_cached_key(label_key);
    out.push(CandidateAction::finish());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env_sim::load_template;

    fn state(task: &str) -> AgentState {
        AgentState::observe(&load_template("text_page").unwrap(), task, 1, &[], &[])
    }

    #[test]
    fn finish_is_last_and_labels_ascend() {
        let cands = enumerate(&state("Highlight the text 'Test For Fun'"));
        assert!(cands.last().unwrap().is_finish());
        let labels: Vec<u64> = cands.iter().filter_map(|c| c.control.as_ref()).map(|c| c.label.parse().unwrap()).collect();
        assert!(labels.windows(2).all(|w| w[0] <= w[1]));
        assert!(cands.iter().any(|c| c.function == "select_text" && c.args["text"] == "Test For Fun"));
    }

    #[test]
    fn task_arguments_become_candidates() {
        let cands = enumerate(&state("Change the font size of 'Meeting Notes' to 16 and color it blue"));
        assert!(cands.iter().any(|c| c.function == "select_option" && c.control_text() == "Font Size" && c.args["option"] == "16"));
        assert!(cands.iter().any(|c| c.function == "set_font_size" && c.args["size"] == 32));
        assert!(cands.iter().any(|c| c.function == "set_font_color" && c.args["color"] == "0070C0" && c.task_args));
        let t = enumerate(&state("Insert a 2x3 table"));
        assert!(t.iter().any(|c| c.function == "insert_table" && c.args["rows"] == 2 && c.args["cols"] == 3));
        assert!(!t.iter().any(|c| c.function == "set_font_size"));
    }

    #[test]
    fn enumeration_is_deterministic_and_unique() {
        let a = enumerate(&state("Make the text 'Action Items' bold"));
        assert_eq!(a, enumerate(&state("Make the text 'Action Items' bold")));
        for (i, x) in a.iter().enumerate() {
            assert!(!a[i + 1..].contains(x));
        }
    }

    #[test]
    fn matching_fills_defaults() {
        let c = enumerate(&state("Bold 'Test For Fun'")).into_iter().find(|c| c.control_text() == "Bold").unwrap();
        assert!(c.matches("", "Bold", "click_input", &Args::new()));
        assert!(c.matches(c.control_label(), "Bold", "click_input", &Args::new()));
        assert!(!c.matches("999", "Bold", "click_input", &Args::new()));
        assert!(!c.matches("", "Italic", "click_input", &Args::new()));
        assert!(CandidateAction::finish().matches("", "", "", &Args::new()));
    }
}
