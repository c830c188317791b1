//! Document operations a task can ask for, with the keywords that signal them and the
//! controls or API functions that accomplish them.

use crate::text;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operation {
    Highlight,
    Bold,
    FontSize,
    FontColor,
    PageBorder,
    Table,
    Chart,
    Shape,
    Picture,
    Comment,
}

impl Operation {
    pub const ALL: [Operation; 10] = [
        Operation::Highlight,
        Operation::Bold,
        Operation::FontSize,
        Operation::FontColor,
        Operation::PageBorder,
        Operation::Table,
        Operation::Chart,
        Operation::Shape,
        Operation::Picture,
        Operation::Comment,
    ];

    /// Stemmed task tokens that signal this operation.
    pub fn keywords(self) -> &'static [&'static str] {
        match self {
            Operation::Highlight => &["highlight", "highlighted"],
            Operation::Bold => &["bold"],
            Operation::FontSize => &["size"],
            Operation::FontColor => &["color", "colour"],
            Operation::PageBorder => &["border"],
            Operation::Table => &["table"],
            Operation::Chart => &["chart"],
            Operation::Shape => &["shape", "rectangle"],
            Operation::Picture => &["picture", "image"],
            Operation::Comment => &["comment"],
        }
    }

    /// The API function that performs this operation directly, if any.
    pub fn api_function(self) -> Option<&'static str> {
        match self {
            Operation::Highlight => Some("toggle_highlight"),
            Operation::Bold => Some("toggle_bold"),
            Operation::FontSize => Some("set_font_size"),
            Operation::FontColor => Some("set_font_color"),
            Operation::PageBorder => Some("insert_page_border"),
            Operation::Table => Some("insert_table"),
            _ => None,
        }
    }

    /// The ribbon control that performs this operation.
    pub fn control_text(self) -> &'static str {
        match self {
            Operation::Highlight => "Text Highlight Color",
            Operation::Bold => "Bold",
            Operation::FontSize => "Font Size",
            Operation::FontColor => "Font Color",
            Operation::PageBorder => "Page Borders",
            Operation::Table => "Table",
            Operation::Chart => "Chart",
            Operation::Shape => "Shapes",
            Operation::Picture => "Pictures",
            Operation::Comment => "New Comment",
        }
    }

    /// Whether the operation formats the current text selection.
    pub fn needs_selection(self) -> bool {
        matches!(
            self,
            Operation::Highlight
                | Operation::Bold
                | Operation::FontSize
                | Operation::FontColor
                | Operation::Comment
        )
    }

    /// Ribbon tab holding the control for this operation.
    pub fn tab(self) -> &'static str {
        match self {
            Operation::Highlight | Operation::Bold | Operation::FontSize | Operation::FontColor => "Home",
            Operation::PageBorder => "Design",
            Operation::Table | Operation::Chart | Operation::Shape | Operation::Picture => "Insert",
            Operation::Comment => "Review",
        }
    }

    /// Plan step wording for performing this operation.
    pub fn step_description(self) -> &'static str {
        match self {
            Operation::Highlight => "Highlight the selected text",
            Operation::Bold => "Make the selected text bold",
            Operation::FontSize => "Set the font size",
            Operation::FontColor => "Set the font color",
            Operation::PageBorder => "Add a page border",
            Operation::Table => "Insert a table",
            Operation::Chart => "Insert a chart",
            Operation::Shape => "Insert a rectangle shape",
            Operation::Picture => "Insert a picture",
            Operation::Comment => "Add a comment",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Operation::Highlight => "highlight",
            Operation::Bold => "bold",
            Operation::FontSize => "font_size",
            Operation::FontColor => "font_color",
            Operation::PageBorder => "page_border",
            Operation::Table => "table",
            Operation::Chart => "chart",
            Operation::Shape => "shape",
            Operation::Picture => "picture",
            Operation::Comment => "comment",
        }
    }
}

/// Operations requested by a task, ignoring words inside quoted target text.
pub fn requested(task: &str) -> BTreeSet<Operation> {
    let tokens = text::token_set(&text::without_quotes(task));
    Operation::ALL
        .iter()
        .copied()
        .filter(|op| op.keywords().iter().any(|k| tokens.contains(*k)))
        .collect()
}

/// The operation an action accomplishes, judged from its function and target control text.
/// Buttons act on click; the font size box acts when an option is chosen or typed.
pub fn accomplished_by(function: &str, control_text: &str) -> Option<Operation> {
    Operation::ALL.iter().copied().find(|op| {
        if op.api_function() == Some(function) {
            return true;
        }
        if control_text.is_empty() || !op.control_text().eq_ignore_ascii_case(control_text) {
            return false;
        }
        match op {
            Operation::FontSize => matches!(function, "select_option" | "set_edit_text"),
            _ => function == "click_input",
        }
    })
}

/// Named font colors understood in task text.
pub const FONT_COLORS: &[(&str, &str)] = &[
    ("red", "FF0000"),
    ("blue", "0070C0"),
    ("green", "00B050"),
    ("orange", "FFC000"),
    ("purple", "7030A0"),
    ("black", "000000"),
];

/// Highlight color names accepted by `toggle_highlight`.
pub const HIGHLIGHT_COLORS: &[&str] = &["yellow", "green", "cyan", "magenta", "red", "blue"];

pub const SELECT_STEP: &str = "Select the target text";

pub fn open_tab_step(tab: &str) -> String {
    format!("Open the {tab} tab")
}

pub const BORDER_STYLES: &[&str] = &["box", "shadow", "double"];
