//! A deterministic stand-in for a desktop word processor: a control tree, a document
//! canvas, a closed function registry and the rules that connect them.

pub mod canvas;
pub mod controls;
pub mod diff;
mod exec;
pub mod registry;
mod render;
pub mod templates;

pub use canvas::{Block, CanvasState, MarkupError, Run, Selection};
pub use controls::{ControlNode, ControlType, ControlView, NodePath};
pub use diff::{apply_diff, diff_canvas, CanvasDiff, DiffEntry};
pub use exec::{resolve_control, ALIASES};
pub use registry::Args;
pub use templates::{load_template, template_ids, templates, AppTemplate};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnvError {
    #[error("unknown template `{0}`")]
    UnknownTemplate(String),
    #[error("no control matches label {label:?} / text {text:?}")]
    UnknownControl { label: String, text: String },
    #[error("{count} controls match `{text}`")]
    AmbiguousControl { text: String, count: usize },
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("bad arguments for {function}: {message}")]
    BadArgs { function: String, message: String },
    #[error("control `{0}` is disabled")]
    DisabledControl(String),
    #[error("`{0}` needs a text selection")]
    NoSelection(String),
    #[error(transparent)]
    Markup(#[from] MarkupError),
}

impl EnvError {
    /// Stable variant name, used in recorded results.
    pub fn kind(&self) -> &'static str {
        match self {
            EnvError::UnknownTemplate(_) => "UnknownTemplate",
            EnvError::UnknownControl { .. } => "UnknownControl",
            EnvError::AmbiguousControl { .. } => "AmbiguousControl",
            EnvError::UnknownFunction(_) => "UnknownFunction",
            EnvError::BadArgs { .. } => "BadArgs",
            EnvError::DisabledControl(_) => "DisabledControl",
            EnvError::NoSelection(_) => "NoSelection",
            EnvError::Markup(_) => "Markup",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    #[default]
    Continue,
    Finish,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Continue => "CONTINUE",
            Status::Finish => "FINISH",
        }
    }
}

/// One grounded action, in the wire shape used by instantiation responses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionCall {
    #[serde(default)]
    pub step: String,
    #[serde(rename = "controlLabel", default)]
    pub control_label: String,
    #[serde(rename = "controlText", default)]
    pub control_text: String,
    pub function: String,
    #[serde(default)]
    pub args: Args,
    #[serde(default)]
    pub status: Status,
}

impl ActionCall {
    pub fn new(step: &str, control_text: &str, function: &str, args: Args) -> Self {
        Self {
            step: step.to_string(),
            control_label: String::new(),
            control_text: control_text.to_string(),
            function: function.to_string(),
            args,
            status: Status::Continue,
        }
    }

    /// The pure status action that ends a run without touching the environment.
    pub fn finish(step: &str) -> Self {
        Self { status: Status::Finish, ..Self::new(step, "", "", Args::new()) }
    }

    pub fn is_pure_finish(&self) -> bool {
        self.function.is_empty() && self.status == Status::Finish
    }

    /// Empty in the sense used by completion judging: no function to call.
    pub fn is_empty(&self) -> bool {
        self.function.trim().is_empty()
    }
}

/// Outcome of one executed action, as recorded in trajectories and agent memory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionResult {
    pub ok: bool,
    pub observation: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ActionResult {
    pub fn success(observation: impl Into<String>) -> Self {
        Self { ok: true, observation: observation.into(), error: None }
    }

    pub fn failure(err: &EnvError) -> Self {
        Self { ok: false, observation: err.to_string(), error: Some(err.kind().to_string()) }
    }
}

/// An immutable view of the application at one step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SnapshotRepr", into = "SnapshotRepr")]
pub struct EnvSnapshot {
    pub controls: Vec<ControlNode>,
    pub canvas: CanvasState,
    pub step_index: usize,
    pub rendered_view: String,
}

#[derive(Serialize, Deserialize)]
struct SnapshotRepr {
    step_index: usize,
    controls: Vec<ControlNode>,
    canvas: String,
}

impl From<EnvSnapshot> for SnapshotRepr {
    fn from(s: EnvSnapshot) -> Self {
        Self { step_index: s.step_index, canvas: s.canvas.to_markup(), controls: s.controls }
    }
}

impl TryFrom<SnapshotRepr> for EnvSnapshot {
    type Error = MarkupError;

    fn try_from(r: SnapshotRepr) -> Result<Self, Self::Error> {
        let canvas = CanvasState::from_markup(&r.canvas)?;
        Ok(EnvSnapshot::new(r.controls, canvas, r.step_index))
    }
}

impl EnvSnapshot {
    /// Builds a snapshot, assigning labels and rendering the text view.
    pub fn new(mut controls: Vec<ControlNode>, canvas: CanvasState, step_index: usize) -> Self {
        controls::relabel(&mut controls);
        let rendered_view = render::render(&controls, &canvas);
        Self { controls, canvas, step_index, rendered_view }
    }

    pub fn list_controls(&self) -> Vec<ControlView> {
        controls::flatten(&self.controls)
    }

    pub fn control_tree_json(&self) -> serde_json::Value {
        controls::tree_json(&self.controls)
    }

    /// Canonical serialized form.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("snapshot serializes")
    }

    /// sha256 of the canonical serialized form.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }

    /// sha256 of the canvas markup alone.
    pub fn canvas_digest(&self) -> String {
        hex::encode(Sha256::digest(self.canvas.to_markup().as_bytes()))
    }

    /// Executes one action. The input snapshot is left untouched; on success the successor
    /// has `step_index + 1`.
    pub fn apply_action(&self, action: &ActionCall) -> Result<(EnvSnapshot, ActionResult), EnvError> {
        exec::apply_action(self, action)
    }

    pub fn resolve_control(&self, label: Option<&str>, text: Option<&str>) -> Result<(NodePath, &ControlNode), EnvError> {
        exec::resolve_control(&self.controls, label, text)
    }
}

/// Free-function form of [`EnvSnapshot::list_controls`].
pub fn list_controls(snapshot: &EnvSnapshot) -> Vec<ControlView> {
    snapshot.list_controls()
}

pub fn apply_action(snapshot: &EnvSnapshot, action: &ActionCall) -> Result<(EnvSnapshot, ActionResult), EnvError> {
    exec::apply_action(snapshot, action)
}
