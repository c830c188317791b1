//! Plain-text view of the window: enabled controls as an indented outline followed by
//! the document content. It stands in for a screenshot when judging.

use super::canvas::{Block, CanvasState};
use super::controls::ControlNode;
use std::fmt::Write as _;

pub fn render(controls: &[ControlNode], canvas: &CanvasState) -> String {
    let mut out = String::from("== controls ==\n");
    for node in controls {
        render_node(&mut out, node, 0);
    }
    out.push_str("== document ==\n");
    if let Some(border) = &canvas.page_border {
        let _ = writeln!(out, "[page border: {border}]");
    }
    for (i, block) in canvas.blocks.iter().enumerate() {
        let _ = write!(out, "{i:>3} ");
        match block {
            Block::Paragraph { runs } => {
                let parts: Vec<String> = runs
                    .iter()
                    .map(|r| {
                        let mut marks = vec![format!("{}pt", r.font_size as f64 / 2.0)];
                        if r.bold {
                            marks.push("bold".into());
                        }
                        if r.color != "000000" {
                            marks.push(format!("#{}", r.color));
                        }
                        if let Some(h) = &r.highlight {
                            marks.push(format!("hl:{h}"));
                        }
                        format!("{:?}{{{}}}", r.text, marks.join(","))
                    })
                    .collect();
                let _ = writeln!(out, "¶ {}", parts.join(" "));
            }
            Block::Table { rows, cols, cells } => {
                let _ = writeln!(out, "table {rows}x{cols} {cells:?}");
            }
            Block::Figure { caption, source } => {
                let _ = writeln!(out, "figure {source} {caption:?}");
            }
            Block::Shape { geometry, fill } => {
                let _ = writeln!(out, "shape {geometry} #{fill}");
            }
            Block::Chart { chart_type, title } => {
                let _ = writeln!(out, "chart {chart_type} {title:?}");
            }
            Block::Comment { author, anchor, text } => {
                let _ = writeln!(out, "comment by {author} on {anchor:?}: {text:?}");
            }
        }
    }
    if let Some(sel) = canvas.selection {
        let text = canvas.selected_text().unwrap_or_default();
        let _ = writeln!(out, "[selection: block {} chars {}..{} {text:?}]", sel.block, sel.start, sel.end);
    }
    out
}

fn render_node(out: &mut String, node: &ControlNode, depth: usize) {
    if !node.enabled {
        return;
    }
    let mut flags = String::new();
    if node.selected == Some(true) {
        flags.push_str(" *");
    }
    if let Some(v) = &node.value {
        let _ = write!(flags, " = {v:?}");
    }
    let _ = writeln!(
        out,
        "{}[{}] {} {:?}{flags}",
        "  ".repeat(depth),
        node.label,
        node.control_type,
        node.control_text
    );
    for child in &node.children {
        render_node(out, child, depth + 1);
    }
}
