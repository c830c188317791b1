use super::canvas::{Block, CanvasState, Run, Selection};
use super::controls::{self, node_at, node_at_mut, ControlNode, ControlType, NodePath};
use super::registry::{self, Args};
use super::{ActionCall, ActionResult, EnvError, EnvSnapshot};
use crate::text::collapse_whitespace;

/// Action wording mapped to the control it names.
pub const ALIASES: &[(&str, &str)] = &[
    ("highlight", "Text Highlight Color"),
    ("highlight color", "Text Highlight Color"),
    ("borders", "Page Borders"),
    ("border", "Page Borders"),
    ("page border", "Page Borders"),
    ("comment", "New Comment"),
    ("color", "Font Color"),
    ("font colour", "Font Color"),
    ("size", "Font Size"),
    ("shape", "Shapes"),
    ("rectangle", "Shapes"),
    ("picture", "Pictures"),
    ("image", "Pictures"),
    ("insert table", "Table"),
    ("insert chart", "Chart"),
];

/// Finds a control by label, then by text: case-insensitive, whitespace-normalized, alias.
/// A tier with two or more enabled matches is ambiguous; a tier whose only match is
/// disabled resolves to it so execution can report it as disabled.
pub fn resolve_control<'a>(
    forest: &'a [ControlNode],
    label: Option<&str>,
    text: Option<&str>,
) -> Result<(NodePath, &'a ControlNode), EnvError> {
    let all = controls::walk(forest);
    let unknown = || EnvError::UnknownControl {
        label: label.unwrap_or_default().to_string(),
        text: text.unwrap_or_default().to_string(),
    };
    if let Some(l) = label.filter(|l| !l.is_empty()) {
        if let Some((path, node)) = all.iter().find(|(_, n)| n.enabled && n.label == l) {
            return Ok((path.clone(), node));
        }
    }
    let text = text.filter(|t| !t.trim().is_empty()).ok_or_else(unknown)?;
    let norm = |s: &str| collapse_whitespace(s).to_lowercase();
    let wanted = norm(text);
    let alias = ALIASES.iter().find(|(a, _)| *a == wanted).map(|(_, c)| c.to_lowercase());

    let tiers: [&dyn Fn(&ControlNode) -> bool; 3] = [
        &|n| n.control_text.to_lowercase() == text.to_lowercase(),
        &|n| norm(&n.control_text) == wanted,
        &|n| alias.as_deref() == Some(n.control_text.to_lowercase().as_str()),
    ];
    for matches in tiers {
        let hits: Vec<&(NodePath, &ControlNode)> = all.iter().filter(|(_, n)| matches(n)).collect();
        let live: Vec<_> = hits.iter().filter(|(_, n)| !n.label.is_empty()).collect();
        match (live.len(), hits.len()) {
            (1, _) => return Ok((live[0].0.clone(), live[0].1)),
            (n, _) if n >= 2 => return Err(EnvError::AmbiguousControl { text: text.to_string(), count: n }),
            (0, 1) => return Ok((hits[0].0.clone(), hits[0].1)),
            (0, n) if n >= 2 => return Err(EnvError::AmbiguousControl { text: text.to_string(), count: n }),
            _ => {}
        }
    }
    Err(unknown())
}

pub fn apply_action(snap: &EnvSnapshot, action: &ActionCall) -> Result<(EnvSnapshot, ActionResult), EnvError> {
    let spec = registry::lookup(&action.function)
        .ok_or_else(|| EnvError::UnknownFunction(action.function.clone()))?;
    let args = registry::canonical_args(spec.name, &action.args)?;
    let mut world = World { controls: snap.controls.clone(), canvas: snap.canvas.clone() };

    let observation = if spec.needs_control {
        if action.control_text.trim().is_empty() && action.control_label.is_empty() {
            return Err(EnvError::BadArgs {
                function: spec.name.to_string(),
                message: "a target control is required".into(),
            });
        }
        let label = Some(action.control_label.as_str());
        let (path, node) = resolve_control(&world.controls, label, Some(&action.control_text))?;
        if node.label.is_empty() {
            return Err(EnvError::DisabledControl(node.control_text.clone()));
        }
        world.on_control(spec.name, &path, &args)?
    } else {
        world.api(spec.name, &args)?
    };
    let next = EnvSnapshot::new(world.controls, world.canvas, snap.step_index + 1);
    Ok((next, ActionResult::success(observation)))
}

struct World {
    controls: Vec<ControlNode>,
    canvas: CanvasState,
}

fn text_arg<'a>(args: &'a Args, key: &str) -> &'a str {
    args[key].as_str().expect("validated text argument")
}

fn int_arg(args: &Args, key: &str) -> i64 {
    args[key].as_i64().expect("validated integer argument")
}

fn bad(function: &str, message: impl Into<String>) -> EnvError {
    EnvError::BadArgs { function: function.to_string(), message: message.into() }
}

impl World {
    fn on_control(&mut self, function: &str, path: &NodePath, args: &Args) -> Result<String, EnvError> {
        let node = node_at(&self.controls, path).clone();
        let name = node.control_text.as_str();
        match (function, node.control_type) {
            ("click_input", ControlType::TabItem) => {
                self.select_tab(path);
                Ok(format!("switched to the {name} tab"))
            }
            ("click_input", ControlType::Button) => self.press(name, path),
            ("click_input", ControlType::Document) => {
                self.canvas.selection = None;
                Ok("clicked the document; selection cleared".into())
            }
            ("click_input", _) => Ok(format!("clicked {name}")),
            ("set_edit_text", ControlType::Edit | ControlType::ComboBox) => {
                self.enter_text(function, path, text_arg(args, "text"))
            }
            ("select_option", ControlType::ComboBox | ControlType::ListItem) => {
                self.enter_text(function, path, text_arg(args, "option"))
            }
            ("type_keys", ControlType::Document) => self.type_into_document(text_arg(args, "keys")),
            ("type_keys", ControlType::Edit | ControlType::ComboBox) => {
                self.enter_text(function, path, text_arg(args, "keys"))
            }
            ("scroll", ControlType::ScrollBar) => {
                let current: i64 = node.value.as_deref().and_then(|v| v.parse().ok()).unwrap_or(0);
                let delta = int_arg(args, "amount");
                let next = match text_arg(args, "direction") {
                    "up" => (current - delta).max(0),
                    _ => (current + delta).min(100),
                };
                node_at_mut(&mut self.controls, path).value = Some(next.to_string());
                Ok(format!("scrolled to {next}"))
            }
            (f, t) => Err(bad(f, format!("{t} control `{name}` does not support {f}"))),
        }
    }

    fn api(&mut self, function: &str, args: &Args) -> Result<String, EnvError> {
        match function {
            "select_text" => {
                let target = text_arg(args, "text");
                let sel = find_text(&self.canvas, target)
                    .ok_or_else(|| bad(function, format!("text `{target}` not found in a single run")))?;
                self.canvas.selection = Some(sel);
                Ok(format!("selected `{target}`"))
            }
            "toggle_highlight" => {
                let color = text_arg(args, "color").to_string();
                self.format_selection(function, |r| {
                    r.highlight = if r.highlight.as_deref() == Some(color.as_str()) { None } else { Some(color.clone()) }
                })
            }
            "set_font_size" => {
                let size = int_arg(args, "size") as u32;
                self.format_selection(function, |r| r.font_size = size)
            }
            "set_font_color" => {
                let color = text_arg(args, "color").to_uppercase();
                self.format_selection(function, |r| r.color = color.clone())
            }
            "toggle_bold" => self.format_selection(function, |r| r.bold = !r.bold),
            "insert_page_border" => {
                let style = text_arg(args, "style");
                self.canvas.page_border = Some(style.to_string());
                Ok(format!("page border set to {style}"))
            }
            "insert_table" => {
                let (rows, cols) = (int_arg(args, "rows") as u32, int_arg(args, "cols") as u32);
                self.canvas.blocks.push(Block::empty_table(rows, cols));
                Ok(format!("inserted a {rows}x{cols} table"))
            }
            other => unreachable!("{other} needs a control"),
        }
    }

    fn press(&mut self, name: &str, path: &NodePath) -> Result<String, EnvError> {
        match name {
            "Bold" => self.format_selection("click_input", |r| r.bold = !r.bold),
            "Text Highlight Color" => self.format_selection("click_input", |r| {
                r.highlight = if r.highlight.is_some() { None } else { Some("yellow".into()) }
            }),
            "Font Color" => self.format_selection("click_input", |r| r.color = "FF0000".into()),
            "Table" => {
                self.canvas.blocks.push(Block::empty_table(3, 3));
                Ok("inserted a 3x3 table".into())
            }
            "Pictures" => {
                self.canvas.blocks.push(Block::Figure { caption: "Picture".into(), source: "picture.png".into() });
                Ok("inserted a picture".into())
            }
            "Shapes" => {
                self.canvas.blocks.push(Block::Shape { geometry: "rectangle".into(), fill: "4472C4".into() });
                Ok("inserted a rectangle shape".into())
            }
            "Chart" => {
                self.canvas.blocks.push(Block::Chart { chart_type: "bar".into(), title: "Chart Title".into() });
                Ok("inserted a bar chart".into())
            }
            "Page Borders" => {
                self.canvas.page_border = Some("box".into());
                Ok("page border set to box".into())
            }
            "New Comment" => {
                let anchor = self
                    .canvas
                    .selected_text()
                    .ok_or_else(|| EnvError::NoSelection("New Comment".into()))?;
                self.canvas.blocks.push(Block::Comment { author: "User".into(), anchor: anchor.clone(), text: String::new() });
                Ok(format!("added a comment on `{anchor}`"))
            }
            "Delete Comment" => {
                match self.canvas.blocks.iter().rposition(|b| matches!(b, Block::Comment { .. })) {
                    Some(i) => {
                        self.canvas.blocks.remove(i);
                        fix_selection_after_removal(&mut self.canvas, i);
                        Ok("deleted the last comment".into())
                    }
                    None => Ok("no comment to delete".into()),
                }
            }
            "Track Changes" => {
                let node = node_at_mut(&mut self.controls, path);
                let on = !node.selected.unwrap_or(false);
                node.selected = Some(on);
                Ok(format!("track changes {}", if on { "on" } else { "off" }))
            }
            other => Ok(format!("clicked {other}; no visible change")),
        }
    }

    fn enter_text(&mut self, function: &str, path: &NodePath, text: &str) -> Result<String, EnvError> {
        let node = node_at(&self.controls, path);
        if node.control_text == "Font Size" {
            let points: f64 = text.trim().parse().map_err(|_| bad(function, format!("`{text}` is not a font size")))?;
            let half = (points * 2.0).round();
            if !(2.0..=818.0).contains(&half) {
                return Err(bad(function, format!("font size {points} out of range")));
            }
            self.format_selection(function, |r| r.font_size = half as u32)?;
        }
        node_at_mut(&mut self.controls, path).value = Some(text.to_string());
        Ok(format!("set `{}` to `{text}`", node_at(&self.controls, path).control_text))
    }

    fn type_into_document(&mut self, keys: &str) -> Result<String, EnvError> {
        if let Some(sel) = self.canvas.selection.take() {
            let (ri, offset) = self.canvas.run_containing(sel.block, sel.start, sel.end).expect("selection lies in a run");
            if let Block::Paragraph { runs } = &mut self.canvas.blocks[sel.block] {
                let chars: Vec<char> = runs[ri].text.chars().collect();
                let (a, b) = (sel.start - offset, sel.end - offset);
                runs[ri].text = chars[..a].iter().chain(keys.chars().collect::<Vec<_>>().iter()).chain(chars[b..].iter()).collect();
            }
            return Ok(format!("replaced the selection with `{keys}`"));
        }
        match self.canvas.blocks.iter_mut().rev().find_map(|b| match b {
            Block::Paragraph { runs } => Some(runs),
            _ => None,
        }) {
            Some(runs) if !runs.is_empty() => runs.last_mut().unwrap().text.push_str(keys),
            Some(runs) => runs.push(Run::plain(keys)),
            None => self.canvas.blocks.push(Block::paragraph(keys)),
        }
        Ok(format!("typed `{keys}`"))
    }

    /// Applies `edit` to the selected characters, splitting the run so only they change.
    fn format_selection(&mut self, function: &str, edit: impl Fn(&mut Run)) -> Result<String, EnvError> {
        let sel = self.canvas.selection.ok_or_else(|| EnvError::NoSelection(function.to_string()))?;
        let (ri, offset) = self.canvas.run_containing(sel.block, sel.start, sel.end).expect("selection lies in a run");
        let Block::Paragraph { runs } = &mut self.canvas.blocks[sel.block] else { unreachable!() };
        let original = runs[ri].clone();
        let chars: Vec<char> = original.text.chars().collect();
        let (a, b) = (sel.start - offset, sel.end - offset);
        let piece = |from: usize, to: usize| Run { text: chars[from..to].iter().collect(), ..original.clone() };
        let mut middle = piece(a, b);
        edit(&mut middle);
        let mut replacement = Vec::new();
        if a > 0 {
            replacement.push(piece(0, a));
        }
        replacement.push(middle);
        if b < chars.len() {
            replacement.push(piece(b, chars.len()));
        }
        runs.splice(ri..ri + 1, replacement);
        Ok(format!("formatted `{}`", chars[a..b].iter().collect::<String>()))
    }

    fn select_tab(&mut self, path: &NodePath) {
        let (parent, idx) = path.split_at(path.len() - 1);
        let siblings: &mut Vec<ControlNode> =
            if parent.is_empty() { &mut self.controls } else { &mut node_at_mut(&mut self.controls, parent).children };
        for (i, node) in siblings.iter_mut().enumerate() {
            if node.control_type != ControlType::TabItem {
                continue;
            }
            let active = i == idx[0];
            node.selected = Some(active);
            for child in &mut node.children {
                child.enabled = active;
            }
        }
    }
}

fn fix_selection_after_removal(canvas: &mut CanvasState, removed: usize) {
    if let Some(sel) = &mut canvas.selection {
        if sel.block > removed {
            sel.block -= 1;
        }
    }
}

/// First exact occurrence of `target` that lies inside a single run.
fn find_text(canvas: &CanvasState, target: &str) -> Option<Selection> {
    let len = target.chars().count();
    for (b, block) in canvas.blocks.iter().enumerate() {
        let Block::Paragraph { runs } = block else { continue };
        let mut offset = 0;
        for run in runs {
            if let Some(byte) = run.text.find(target) {
                let start = offset + run.text[..byte].chars().count();
                return Some(Selection { block: b, start, end: start + len });
            }
            offset += run.char_len();
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env_sim::controls::ControlNode as N;
    use serde_json::json;

    fn ribbon() -> Vec<N> {
        let mut home = N::new("Home", ControlType::TabItem).with_children(vec![
            N::new("Bold", ControlType::Button),
            N::new("Text Highlight Color", ControlType::Button),
            N::new("Font Size", ControlType::ComboBox),
        ]);
        home.selected = Some(true);
        let mut insert = N::new("Insert", ControlType::TabItem)
            .with_children(vec![N::new("Chart", ControlType::Button).disabled()]);
        insert.selected = Some(false);
        vec![home, insert, N::new("Document", ControlType::Document)]
    }

    fn snap(text: &str) -> EnvSnapshot {
        let canvas = CanvasState { blocks: vec![Block::paragraph(text)], ..Default::default() };
        EnvSnapshot::new(ribbon(), canvas, 0)
    }

    fn act(control: &str, function: &str, args: serde_json::Value) -> ActionCall {
        ActionCall::new("", control, function, serde_json::from_value(args).unwrap())
    }

    #[test]
    fn select_text_spans_first_match() {
        let (s, _) = snap("hello world").apply_action(&act("", "select_text", json!({"text": "hello"}))).unwrap();
        assert_eq!(s.canvas.selection, Some(Selection { block: 0, start: 0, end: 5 }));
        assert_eq!(s.step_index, 1);
    }

    #[test]
    fn highlight_button_formats_selection() {
        let s = snap("hello world");
        let (s, _) = s.apply_action(&act("", "select_text", json!({"text": "world"}))).unwrap();
        let (s, r) = s.apply_action(&act("Highlight", "click_input", json!({}))).unwrap();
        assert!(r.ok);
        let Block::Paragraph { runs } = &s.canvas.blocks[0] else { panic!() };
        assert_eq!(runs.len(), 2);
        assert_eq!(runs[1].text, "world");
        assert_eq!(runs[1].highlight.as_deref(), Some("yellow"));
        assert_eq!(runs[0].highlight, None);
        assert_eq!(s.canvas.selected_text().as_deref(), Some("world"));
    }

    #[test]
    fn unknown_function_leaves_input() {
        let s = snap("x y");
        let before = s.to_json();
        assert!(matches!(s.apply_action(&act("", "fly", json!({}))), Err(EnvError::UnknownFunction(_))));
        assert_eq!(s.to_json(), before);
    }

    #[test]
    fn formatting_needs_selection() {
        assert!(matches!(snap("abc").apply_action(&act("Bold", "click_input", json!({}))), Err(EnvError::NoSelection(_))));
    }

    #[test]
    fn label_wins_over_text() {
        let s = snap("abc");
        let (_, node) = s.resolve_control(Some("2"), Some("Chart")).unwrap();
        assert_eq!(node.control_text, "Bold");
    }

    #[test]
    fn duplicate_buttons_are_ambiguous() {
        let mut forest = ribbon();
        forest.push(N::new("Bold", ControlType::Button));
        controls::relabel(&mut forest);
        assert!(matches!(resolve_control(&forest, None, Some("bold")), Err(EnvError::AmbiguousControl { .. })));
    }

    #[test]
    fn hidden_tab_button_is_disabled_until_tab_clicked() {
        let s = snap("abc");
        assert!(matches!(s.apply_action(&act("Chart", "click_input", json!({}))), Err(EnvError::DisabledControl(_))));
        let (s, _) = s.apply_action(&act("Insert", "click_input", json!({}))).unwrap();
        let texts: Vec<_> = s.list_controls().into_iter().map(|c| c.control_text).collect();
        assert!(texts.contains(&"Chart".to_string()));
        assert!(!texts.contains(&"Bold".to_string()));
        let (s, _) = s.apply_action(&act("Chart", "click_input", json!({}))).unwrap();
        assert!(matches!(s.canvas.blocks.last(), Some(Block::Chart { .. })));
    }

    #[test]
    fn font_size_combo_uses_points() {
        let s = snap("big text");
        let (s, _) = s.apply_action(&act("", "select_text", json!({"text": "big text"}))).unwrap();
        let (s, _) = s.apply_action(&act("Font Size", "select_option", json!({"option": "14"}))).unwrap();
        let Block::Paragraph { runs } = &s.canvas.blocks[0] else { panic!() };
        assert_eq!(runs[0].font_size, 28);
    }

    #[test]
    fn type_keys_replaces_selection() {
        let s = snap("hello world");
        let (s, _) = s.apply_action(&act("", "select_text", json!({"text": "world"}))).unwrap();
        let (s, _) = s.apply_action(&act("Document", "type_keys", json!({"keys": "there"}))).unwrap();
        assert_eq!(s.canvas.runs().next().unwrap().1.text, "hello there");
        assert_eq!(s.canvas.selection, None);
    }
}
