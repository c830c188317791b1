//! Fixed-length feature vectors for (state, candidate) pairs. Every feature is computed
//! from fields a training record's input also carries.
//!
//! Action features:
//!
//! | name | value |
//! |---|---|
//! | `bias.finish` | 1 for the pure FINISH |
//! | `finish.step` | step_id / 20 for the pure FINISH |
//! | `finish.no_remaining` | 1 for the pure FINISH when no requested operation is pending |
//! | `ctrl.task_overlap` | best token overlap of the control text or one of its aliases with the task |
//! | `ctrl.plan_overlap` | the same against the first step of the previous plan |
//! | `fn.task_affinity` | token overlap of the function name with the task |
//! | `fn.plan_affinity` | the same against the first step of the previous plan |
//! | `args.in_task` | 1 when an argument was read off the task text |
//! | `hist.repeat` | 1 when the identical action is already in the history |
//! | `hist.fn_done` | 1 when the function is already in the history |
//! | `hist.ctrl_done` | 1 when the control is already in the history |
//! | `sel.redundant` | 1 for select_text when a selection already exists |
//! | `sel.missing` | 1 for select_text when a pending operation needs a selection |
//! | `op.pending` | 1 when the candidate performs a requested, not yet done operation |
//! | `op.done` | 1 when it performs an operation already done |
//! | `op.unrequested` | 1 when it performs an operation the task does not ask for |
//! | `tab.pending` | 1 for a tab holding the unlisted control of a pending operation |
//! | `pos.prior` | 1 − (position − 1) / controls for control candidates |
//! | `type.<ControlType>` | control type one-hot |
//! | `fn.<function>` | function one-hot |
//! | `state.step` | step_id / 20 for real candidates |
//!
//! Status features (for P(FINISH | candidate)): `status.bias`, `status.remaining_zero`,
//! `status.remaining`, `status.is_select`, `status.is_tab`, `status.step`.

use super::candidates::CandidateAction;
use super::state::AgentState;
use crate::env_sim::{registry, ControlType, ALIASES};
use crate::ops::{self, accomplished_by, Operation};
use crate::text;
use std::collections::BTreeSet;
use std::sync::OnceLock;

/// Step count used to scale step features.
pub const STEP_SCALE: f64 = 20.0;

const FIXED: [&str; 18] = [
    "bias.finish",
    "finish.step",
    "finish.no_remaining",
    "ctrl.task_overlap",
    "ctrl.plan_overlap",
    "fn.task_affinity",
    "fn.plan_affinity",
    "args.in_task",
    "hist.repeat",
    "hist.fn_done",
    "hist.ctrl_done",
    "sel.redundant",
    "sel.missing",
    "op.pending",
    "op.done",
    "op.unrequested",
    "tab.pending",
    "pos.prior",
];

pub const STATUS_FEATURES: [&str; 6] =
    ["status.bias", "status.remaining_zero", "status.remaining", "status.is_select", "status.is_tab", "status.step"];

/// Names of the action features, in vector order.
pub fn action_feature_names() -> &'static [String] {
    static NAMES: OnceLock<Vec<String>> = OnceLock::new();
    NAMES.get_or_init(|| {
        let mut v: Vec<String> = FIXED.iter().map(|s| s.to_string()).collect();
        v.extend(ControlType::ALL.iter().map(|t| format!("type.{}", t.as_str())));
        v.extend(registry::FUNCTIONS.iter().map(|f| format!("fn.{}", f.name)));
        v.push("state.step".into());
        v
    })
}

pub fn n_action_features() -> usize {
    action_feature_names().len()
}

/// Per-state quantities shared by all candidates.
#[derive(Debug, Clone)]
pub struct StateContext {
    task_tokens: BTreeSet<String>,
    plan_tokens: BTreeSet<String>,
    requested: BTreeSet<Operation>,
    done: BTreeSet<Operation>,
    pending: BTreeSet<Operation>,
    has_selection: bool,
    listed: BTreeSet<String>,
    history: Vec<(String, String, String)>,
    step: f64,
    n_controls: usize,
}

impl StateContext {
    pub fn new(state: &AgentState) -> Self {
        let requested = ops::requested(&state.task);
        let mut done = BTreeSet::new();
        let mut has_selection = false;
        let mut history = Vec::new();
        for h in state.previous_actions.iter().filter(|h| h.result.ok) {
            if let Some(op) = accomplished_by(&h.function, &h.control_name) {
                done.insert(op);
            }
            match h.function.as_str() {
                "select_text" => has_selection = true,
                "click_input" | "type_keys" if h.control_name == "Document" => has_selection = false,
                _ => {}
            }
            let args = registry::canonical_args(&h.function, &h.args).unwrap_or_else(|_| h.args.clone());
            history.push((h.control_name.clone(), h.function.clone(), serde_json::to_string(&args).expect("args")));
        }
        let pending = requested.difference(&done).copied().collect();
        Self {
            task_tokens: text::token_set(&text::without_quotes(&state.task)),
            plan_tokens: state.previous_plan.first().map(|p| text::token_set(p)).unwrap_or_default(),
            requested,
            done,
            pending,
            has_selection,
            listed: state.observations.controls.iter().map(|c| c.control_text.clone()).collect(),
            history,
            step: state.step_id as f64 / STEP_SCALE,
            n_controls: state.observations.controls.len(),
        }
    }

    fn needs_selection(&self) -> bool {
        !self.has_selection && self.pending.iter().any(|op| op.needs_selection())
    }

    /// Requested operations still pending after `cand` runs.
    pub fn remaining_after(&self, cand: &CandidateAction) -> usize {
        let effect = effect(cand);
        self.pending.iter().filter(|op| Some(**op) != effect).count()
    }
}

/// The document operation a candidate performs, if any.
pub fn effect(cand: &CandidateAction) -> Option<Operation> {
    if cand.is_finish() {
        return None;
    }
    accomplished_by(&cand.function, cand.control_text())
}

fn alias_overlap(control_text: &str, tokens: &BTreeSet<String>) -> f64 {
    let own = text::overlap(&text::token_set(control_text), tokens);
    ALIASES
        .iter()
        .filter(|(_, target)| target.eq_ignore_ascii_case(control_text))
        .map(|(alias, _)| text::overlap(&text::token_set(alias), tokens))
        .fold(own, f64::max)
}

fn function_tokens(function: &str) -> BTreeSet<String> {
    text::token_set(&function.replace('_', " "))
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

pub fn featurize(ctx: &StateContext, cand: &CandidateAction) -> Vec<f64> {
    let n = n_action_features();
    let mut f = vec![0.0; n];
    if cand.is_finish() {
        f[0] = 1.0;
        f[1] = ctx.step;
        f[2] = flag(ctx.pending.is_empty());
        return f;
    }
    let ctrl = cand.control_text();
    let op = effect(cand);
    let args_json = serde_json::to_string(&cand.args).expect("args");
    if !ctrl.is_empty() {
        f[3] = alias_overlap(ctrl, &ctx.task_tokens);
        f[4] = alias_overlap(ctrl, &ctx.plan_tokens);
    }
    let fn_tokens = function_tokens(&cand.function);
    f[5] = text::overlap(&fn_tokens, &ctx.task_tokens);
    f[6] = text::overlap(&fn_tokens, &ctx.plan_tokens);
    f[7] = flag(cand.task_args);
    f[8] = flag(ctx.history.iter().any(|(c, func, a)| c == ctrl && *func == cand.function && *a == args_json));
    f[9] = flag(ctx.history.iter().any(|(_, func, _)| *func == cand.function));
    f[10] = flag(!ctrl.is_empty() && ctx.history.iter().any(|(c, _, _)| c == ctrl));
    let is_select = cand.function == "select_text";
    f[11] = flag(is_select && ctx.has_selection);
    f[12] = flag(is_select && ctx.needs_selection());
    f[13] = flag(op.is_some_and(|o| ctx.pending.contains(&o)));
    f[14] = flag(op.is_some_and(|o| ctx.done.contains(&o)));
    f[15] = flag(op.is_some_and(|o| !ctx.requested.contains(&o)));
    f[16] = flag(is_tab_click(cand) && ctx.pending.iter().any(|o| o.tab() == ctrl && !ctx.listed.contains(o.control_text())));
    if let Some(c) = &cand.control {
        let pos: f64 = c.label.parse().unwrap_or(1.0);
        f[17] = 1.0 - (pos - 1.0) / ctx.n_controls.max(1) as f64;
        let t = ControlType::ALL.iter().position(|t| *t == c.control_type).expect("known type");
        f[FIXED.len() + t] = 1.0;
    }
    let fi = registry::registry_index(&cand.function).expect("registered function");
    f[FIXED.len() + ControlType::ALL.len() + fi] = 1.0;
    f[n - 1] = ctx.step;
    f
}

fn is_tab_click(cand: &CandidateAction) -> bool {
    cand.function == "click_input" && cand.control.as_ref().is_some_and(|c| c.control_type == ControlType::TabItem)
}

/// Inputs of the logistic FINISH head for a real candidate.
pub fn status_features(ctx: &StateContext, cand: &CandidateAction) -> [f64; 6] {
    let remaining = ctx.remaining_after(cand);
    [
        1.0,
        flag(remaining == 0),
        remaining as f64,
        flag(cand.function == "select_text"),
        flag(is_tab_click(cand)),
        ctx.step,
    ]
}
