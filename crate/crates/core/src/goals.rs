//! What a task asks for, parsed from its wording, and whether a finished document
//! delivers it.

use crate::env_sim::{ActionCall, Args, Block, CanvasState, DiffEntry, Run};
use crate::ops::{self, Operation, BORDER_STYLES, FONT_COLORS};
use crate::text;
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::collections::BTreeSet;

/// Default font size of template text, in half-points.
pub const DEFAULT_FONT_SIZE: u32 = 24;
pub const DEFAULT_COLOR: &str = "000000";

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TaskGoal {
    pub ops: BTreeSet<Operation>,
    /// Quoted target text, if the task names one.
    pub target: Option<String>,
    /// Requested font size in half-points.
    pub font_size: Option<u32>,
    /// Requested font color as hex.
    pub color: Option<String>,
    pub border_style: Option<String>,
    pub table_dims: Option<(u32, u32)>,
}

impl TaskGoal {
    pub fn from_task(task: &str) -> Self {
        let ops = ops::requested(task);
        let dims = text::dimensions(task);
        let in_dims = |n: u32| dims.iter().any(|&(r, c)| r == n || c == n);
        let tokens = text::tokenize(&text::without_quotes(task));
        let font_size = ops
            .contains(&Operation::FontSize)
            .then(|| text::integers(task).into_iter().find(|&n| !in_dims(n) && (1..=409).contains(&n)))
            .flatten()
            .map(|pt| pt * 2);
        let color = ops
            .contains(&Operation::FontColor)
            .then(|| {
                tokens
                    .iter()
                    .find_map(|t| FONT_COLORS.iter().find(|(name, _)| name == t).map(|(_, hex)| hex.to_string()))
            })
            .flatten();
        let border_style = ops
            .contains(&Operation::PageBorder)
            .then(|| tokens.iter().find(|t| BORDER_STYLES.contains(&t.as_str())).cloned())
            .flatten();
        let table_dims = ops.contains(&Operation::Table).then(|| dims.first().copied()).flatten();
        Self { ops, target: text::quoted_spans(task).into_iter().next(), font_size, color, border_style, table_dims }
    }

    /// Per-operation verdicts for a finished document and its diff from the start state.
    pub fn check(&self, final_canvas: &CanvasState, diff: &[DiffEntry]) -> Vec<(Operation, bool)> {
        self.ops.iter().map(|&op| (op, self.op_done(op, final_canvas, diff))).collect()
    }

    /// True when the task names at least one operation and every one of them is done.
    pub fn satisfied(&self, final_canvas: &CanvasState, diff: &[DiffEntry]) -> bool {
        !self.ops.is_empty() && self.check(final_canvas, diff).iter().all(|(_, ok)| *ok)
    }

    fn op_done(&self, op: Operation, canvas: &CanvasState, diff: &[DiffEntry]) -> bool {
        let run_ok = |r: &Run| match op {
            Operation::Highlight => r.highlight.is_some(),
            Operation::Bold => r.bold,
            Operation::FontSize => match self.font_size {
                Some(s) => r.font_size == s,
                None => r.font_size != DEFAULT_FONT_SIZE,
            },
            Operation::FontColor => match &self.color {
                Some(c) => r.color.eq_ignore_ascii_case(c),
                None => r.color != DEFAULT_COLOR,
            },
            _ => false,
        };
        match op {
            Operation::Highlight | Operation::Bold | Operation::FontSize | Operation::FontColor => {
                match &self.target {
                    Some(t) => canvas.runs().any(|(_, r)| &r.text == t && run_ok(r)),
                    None => {
                        let field = match op {
                            Operation::Highlight => ".highlight",
                            Operation::Bold => ".bold",
                            Operation::FontSize => ".font_size",
                            _ => ".color",
                        };
                        changed_runs(canvas, diff, field).into_iter().any(run_ok)
                    }
                }
            }
            Operation::PageBorder => match (&canvas.page_border, &self.border_style) {
                (Some(b), Some(want)) => b == want,
                (Some(_), None) => true,
                (None, _) => false,
            },
            Operation::Comment => new_blocks(canvas, diff, "comment").iter().any(|b| match (b, &self.target) {
                (Block::Comment { anchor, .. }, Some(t)) => anchor == t,
                _ => true,
            }),
            Operation::Table => new_blocks(canvas, diff, "table").iter().any(|b| match (b, self.table_dims) {
                (Block::Table { rows, cols, .. }, Some((r, c))) => *rows == r && *cols == c,
                _ => true,
            }),
            Operation::Chart => !new_blocks(canvas, diff, "chart").is_empty(),
            Operation::Shape => !new_blocks(canvas, diff, "shape").is_empty(),
            Operation::Picture => !new_blocks(canvas, diff, "figure").is_empty(),
        }
    }
}

/// A correct action sequence for `goal`, starting from a template with the Home tab open.
/// `target` is the text formatting operations act on.
pub fn expert_actions(goal: &TaskGoal, target: &str) -> Vec<ActionCall> {
    let args = |v: serde_json::Value| -> Args { serde_json::from_value(v).expect("object literal") };
    let mut out = Vec::new();
    if goal.ops.iter().any(|op| op.needs_selection()) {
        out.push(ActionCall::new(ops::SELECT_STEP, "", "select_text", args(json!({ "text": target }))));
    }
    let mut tab = "Home";
    for &op in &goal.ops {
        let step = op.step_description();
        let action = match op {
            Operation::Highlight => ActionCall::new(step, "Highlight", "click_input", Args::new()),
            Operation::Bold => ActionCall::new(step, "Bold", "click_input", Args::new()),
            Operation::FontSize => {
                let points = goal.font_size.map_or(14, |h| h / 2);
                ActionCall::new(step, "Font Size", "select_option", args(json!({ "option": points.to_string() })))
            }
            Operation::FontColor => {
                let color = goal.color.clone().unwrap_or_else(|| "FF0000".into());
                ActionCall::new(step, "", "set_font_color", args(json!({ "color": color })))
            }
            Operation::PageBorder => {
                let style = goal.border_style.clone().unwrap_or_else(|| "box".into());
                ActionCall::new(step, "", "insert_page_border", args(json!({ "style": style })))
            }
            Operation::Table => {
                let (rows, cols) = goal.table_dims.unwrap_or((3, 3));
                ActionCall::new(step, "", "insert_table", args(json!({ "rows": rows, "cols": cols })))
            }
            Operation::Chart | Operation::Shape | Operation::Picture | Operation::Comment => {
                if tab != op.tab() {
                    tab = op.tab();
                    out.push(ActionCall::new(&ops::open_tab_step(tab), tab, "click_input", Args::new()));
                }
                ActionCall::new(step, op.control_text(), "click_input", Args::new())
            }
        };
        out.push(action);
    }
    out
}

/// Blocks of `kind` in the final canvas whose kind entry appears in the diff.
fn new_blocks<'a>(canvas: &'a CanvasState, diff: &[DiffEntry], kind: &str) -> Vec<&'a Block> {
    diff.iter()
        .filter(|e| e.path.ends_with(".kind") && e.after.as_deref() == Some(kind) && e.before.as_deref() != Some(kind))
        .filter_map(|e| block_index(&e.path).and_then(|i| canvas.blocks.get(i)))
        .collect()
}

/// Runs whose `field` changed according to the diff.
fn changed_runs<'a>(canvas: &'a CanvasState, diff: &[DiffEntry], field: &str) -> Vec<&'a Run> {
    diff.iter()
        .filter(|e| e.path.ends_with(field) && e.path.contains(".runs["))
        .filter_map(|e| {
            let b = block_index(&e.path)?;
            let r = e.path.split(".runs[").nth(1)?.split(']').next()?.parse::<usize>().ok()?;
            match canvas.blocks.get(b)? {
                Block::Paragraph { runs } => runs.get(r),
                _ => None,
            }
        })
        .collect()
}

fn block_index(path: &str) -> Option<usize> {
    path.strip_prefix("blocks[")?.split(']').next()?.parse().ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env_sim::{diff_canvas, Selection};

    #[test]
    fn parses_parameters() {
        let g = TaskGoal::from_task("Change the font size of 'Meeting Notes' to 16 and color it red");
        assert_eq!(g.target.as_deref(), Some("Meeting Notes"));
        assert_eq!(g.font_size, Some(32));
        assert_eq!(g.color.as_deref(), Some("FF0000"));
        let t = TaskGoal::from_task("Insert a 2x4 table");
        assert_eq!(t.table_dims, Some((2, 4)));
        assert_eq!(t.font_size, None);
    }

    #[test]
    fn highlight_on_target() {
        let before = CanvasState { blocks: vec![Block::paragraph("Test For Fun")], ..Default::default() };
        let mut after = before.clone();
        if let Block::Paragraph { runs } = &mut after.blocks[0] {
            runs[0].highlight = Some("yellow".into());
        }
        after.selection = Some(Selection { block: 0, start: 0, end: 12 });
        let g = TaskGoal::from_task("Highlight the text 'Test For Fun'");
        assert!(g.satisfied(&after, &diff_canvas(&before, &after)));
        assert!(!g.satisfied(&before, &[]));
        assert!(!TaskGoal::from_task("Do something nice").satisfied(&after, &[]));
    }
}
