//! The closed set of callable functions and their argument contracts.

use super::EnvError;
use crate::ops::{BORDER_STYLES, HIGHLIGHT_COLORS};
use serde_json::Value;
use std::collections::BTreeMap;

/// Scalar arguments of an action call.
pub type Args = BTreeMap<String, Value>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArgKind {
    Text,
    Bool,
    Int { min: i64, max: i64 },
    Choice(&'static [&'static str]),
    HexColor,
}

#[derive(Debug, Clone, Copy)]
pub struct ArgSpec {
    pub name: &'static str,
    pub kind: ArgKind,
    /// JSON literal used when the argument is omitted; `None` makes it required.
    pub default: Option<&'static str>,
}

#[derive(Debug, Clone, Copy)]
pub struct FunctionSpec {
    pub name: &'static str,
    pub needs_control: bool,
    pub summary: &'static str,
    pub args: &'static [ArgSpec],
}

const fn arg(name: &'static str, kind: ArgKind, default: Option<&'static str>) -> ArgSpec {
    ArgSpec { name, kind, default }
}

pub const FUNCTIONS: &[FunctionSpec] = &[
    FunctionSpec {
        name: "click_input",
        needs_control: true,
        summary: "Click the control item with the mouse.",
        args: &[
            arg("button", ArgKind::Choice(&["left", "right"]), Some("\"left\"")),
            arg("double", ArgKind::Bool, Some("false")),
        ],
    },
    FunctionSpec {
        name: "set_edit_text",
        needs_control: true,
        summary: "Replace the text of an Edit or ComboBox control.",
        args: &[arg("text", ArgKind::Text, None)],
    },
    FunctionSpec {
        name: "type_keys",
        needs_control: true,
        summary: "Type text into the control; in the document it replaces the selection or appends.",
        args: &[arg("keys", ArgKind::Text, None)],
    },
    FunctionSpec {
        name: "select_text",
        needs_control: false,
        summary: "Select the first exact occurrence of the text in the document.",
        args: &[arg("text", ArgKind::Text, None)],
    },
    FunctionSpec {
        name: "select_option",
        needs_control: true,
        summary: "Choose an option of a ComboBox or ListItem control.",
        args: &[arg("option", ArgKind::Text, None)],
    },
    FunctionSpec {
        name: "scroll",
        needs_control: true,
        summary: "Scroll a ScrollBar control.",
        args: &[
            arg("direction", ArgKind::Choice(&["up", "down"]), None),
            arg("amount", ArgKind::Int { min: 1, max: 100 }, Some("1")),
        ],
    },
    FunctionSpec {
        name: "toggle_highlight",
        needs_control: false,
        summary: "Toggle a highlight color on the selected text.",
        args: &[arg("color", ArgKind::Choice(HIGHLIGHT_COLORS), Some("\"yellow\""))],
    },
    FunctionSpec {
        name: "set_font_size",
        needs_control: false,
        summary: "Set the font size of the selected text, in half-points.",
        args: &[arg("size", ArgKind::Int { min: 2, max: 818 }, None)],
    },
    FunctionSpec {
        name: "set_font_color",
        needs_control: false,
        summary: "Set the font color of the selected text as six hex digits.",
        args: &[arg("color", ArgKind::HexColor, None)],
    },
    FunctionSpec {
        name: "insert_page_border",
        needs_control: false,
        summary: "Put a border around the page.",
        args: &[arg("style", ArgKind::Choice(BORDER_STYLES), Some("\"box\""))],
    },
    FunctionSpec {
        name: "insert_table",
        needs_control: false,
        summary: "Append an empty table to the document.",
        args: &[
            arg("rows", ArgKind::Int { min: 1, max: 63 }, None),
            arg("cols", ArgKind::Int { min: 1, max: 63 }, None),
        ],
    },
    FunctionSpec {
        name: "toggle_bold",
        needs_control: false,
        summary: "Toggle bold on the selected text.",
        args: &[],
    },
];

pub fn lookup(name: &str) -> Option<&'static FunctionSpec> {
    FUNCTIONS.iter().find(|f| f.name == name)
}

/// Position of a function in registry order, used for deterministic tie-breaking.
pub fn registry_index(name: &str) -> Option<usize> {
    FUNCTIONS.iter().position(|f| f.name == name)
}

/// Validates arguments and fills defaults. `control_id` is accepted and dropped because the
/// target control is named by the action itself.
pub fn canonical_args(function: &str, args: &Args) -> Result<Args, EnvError> {
    let spec = lookup(function).ok_or_else(|| EnvError::UnknownFunction(function.to_string()))?;
    let bad = |m: String| EnvError::BadArgs { function: function.to_string(), message: m };
    for key in args.keys() {
        if key != "control_id" && !spec.args.iter().any(|a| a.name == key) {
            return Err(bad(format!("unexpected argument `{key}`")));
        }
    }
    let mut out = Args::new();
    for a in spec.args {
        let value = match (args.get(a.name), a.default) {
            (Some(v), _) => v.clone(),
            (None, Some(d)) => serde_json::from_str(d).expect("registry default is valid JSON"),
            (None, None) => return Err(bad(format!("missing argument `{}`", a.name))),
        };
        check(&a.kind, &value).map_err(|m| bad(format!("argument `{}`: {m}", a.name)))?;
        out.insert(a.name.to_string(), value);
    }
    Ok(out)
}

fn check(kind: &ArgKind, v: &Value) -> Result<(), String> {
    match kind {
        ArgKind::Text => match v.as_str() {
            Some(s) if !s.is_empty() => Ok(()),
            _ => Err("expected non-empty text".into()),
        },
        ArgKind::Bool => v.as_bool().map(|_| ()).ok_or_else(|| "expected a boolean".into()),
        ArgKind::Int { min, max } => match v.as_i64() {
            Some(n) if (*min..=*max).contains(&n) => Ok(()),
            _ => Err(format!("expected an integer in {min}..={max}")),
        },
        ArgKind::Choice(options) => match v.as_str() {
            Some(s) if options.contains(&s) => Ok(()),
            _ => Err(format!("expected one of {}", options.join("|"))),
        },
        ArgKind::HexColor => match v.as_str() {
            Some(s) if s.len() == 6 && s.chars().all(|c| c.is_ascii_hexdigit()) => Ok(()),
            _ => Err("expected six hex digits".into()),
        },
    }
}

/// Human-readable API listing substituted into prompts.
pub fn describe_apis() -> String {
    let mut out = String::new();
    for f in FUNCTIONS {
        let args: Vec<String> = f
            .args
            .iter()
            .map(|a| {
                let kind = match a.kind {
                    ArgKind::Text => "text".to_string(),
                    ArgKind::Bool => "bool".to_string(),
                    ArgKind::Int { min, max } => format!("int {min}..{max}"),
                    ArgKind::Choice(o) => o.join("|"),
                    ArgKind::HexColor => "hex color".to_string(),
                };
                match a.default {
                    Some(d) => format!("{}: {kind} = {d}", a.name),
                    None => format!("{}: {kind}", a.name),
                }
            })
            .collect();
        let target = if f.needs_control { "needs a target control" } else { "no target control" };
        out.push_str(&format!("- {}({}) [{target}]: {}\n", f.name, args.join(", "), f.summary));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn args(v: Value) -> Args {
        serde_json::from_value(v).unwrap()
    }

    #[test]
    fn twelve_functions_in_order() {
        let names: Vec<_> = FUNCTIONS.iter().map(|f| f.name).collect();
        assert_eq!(names.len(), 12);
        assert_eq!(names[0], "click_input");
        assert_eq!(names[11], "toggle_bold");
        assert_eq!(registry_index("select_text"), Some(3));
    }

    #[test]
    fn defaults_fill_and_control_id_drops() {
        let a = canonical_args("click_input", &args(json!({"control_id": "101"}))).unwrap();
        assert_eq!(a, args(json!({"button": "left", "double": false})));
    }

    #[test]
    fn rejects_bad_args() {
        assert!(canonical_args("insert_table", &args(json!({"rows": 0, "cols": 2}))).is_err());
        assert!(canonical_args("set_font_color", &args(json!({"color": "red"}))).is_err());
        assert!(canonical_args("select_text", &args(json!({}))).is_err());
        assert!(canonical_args("toggle_bold", &args(json!({"x": 1}))).is_err());
        assert!(matches!(canonical_args("fly", &Args::new()), Err(EnvError::UnknownFunction(_))));
    }
}
