//! Bundled starting documents. Each lives in `assets/templates/<id>/` as a description,
//! canonical canvas markup and a control manifest.

use super::canvas::CanvasState;
use super::controls::ControlNode;
use super::{EnvError, EnvSnapshot};
use std::sync::OnceLock;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AppTemplate {
    pub template_id: String,
    pub description: String,
    pub initial_canvas: CanvasState,
    pub initial_controls: Vec<ControlNode>,
}

impl AppTemplate {
    pub fn snapshot(&self) -> EnvSnapshot {
        EnvSnapshot::new(self.initial_controls.clone(), self.initial_canvas.clone(), 0)
    }
}

macro_rules! bundle {
    ($($id:literal),* $(,)?) => {
        &[$((
            $id,
            include_str!(concat!("../../assets/templates/", $id, "/description.txt")),
            include_str!(concat!("../../assets/templates/", $id, "/canvas.xml")),
            include_str!(concat!("../../assets/templates/", $id, "/controls.json")),
        )),*]
    };
}

const BUNDLE: &[(&str, &str, &str, &str)] =
    bundle!("chart", "comments", "figure", "rect_shape", "table", "text_page");

/// All bundled templates, sorted by id.
pub fn templates() -> &'static [AppTemplate] {
    static PARSED: OnceLock<Vec<AppTemplate>> = OnceLock::new();
    PARSED.get_or_init(|| {
        BUNDLE
            .iter()
            .map(|(id, desc, canvas, controls)| AppTemplate {
                template_id: id.to_string(),
                description: desc.trim().to_string(),
                initial_canvas: CanvasState::from_markup(canvas)
                    .unwrap_or_else(|e| panic!("bundled template {id}: {e}")),
                initial_controls: serde_json::from_str(controls)
                    .unwrap_or_else(|e| panic!("bundled template {id} controls: {e}")),
            })
            .collect()
    })
}

pub fn template_ids() -> Vec<&'static str> {
    templates().iter().map(|t| t.template_id.as_str()).collect()
}

pub fn find_template(template_id: &str) -> Result<&'static AppTemplate, EnvError> {
    templates()
        .iter()
        .find(|t| t.template_id == template_id)
        .ok_or_else(|| EnvError::UnknownTemplate(template_id.to_string()))
}

/// Fresh snapshot of a bundled template at step 0.
pub fn load_template(template_id: &str) -> Result<EnvSnapshot, EnvError> {
    Ok(find_template(template_id)?.snapshot())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env_sim::Block;

    #[test]
    fn bundle_covers_every_block_kind() {
        let kinds: std::collections::BTreeSet<_> = templates()
            .iter()
            .flat_map(|t| t.initial_canvas.blocks.iter().map(|b| b.kind()))
            .collect();
        assert_eq!(kinds.len(), 6);
        assert!(templates().iter().all(|t| !t.description.is_empty()));
    }

    #[test]
    fn rect_shape_has_one_shape() {
        let s = load_template("rect_shape").unwrap();
        let shapes = s.canvas.blocks.iter().filter(|b| matches!(b, Block::Shape { .. })).count();
        assert_eq!(shapes, 1);
        assert_eq!(find_template("rect_shape").unwrap().description, "A doc with a rectangle shape.");
    }

    #[test]
    fn loads_are_identical() {
        assert_eq!(load_template("chart").unwrap().to_json(), load_template("chart").unwrap().to_json());
        assert!(matches!(load_template("missing"), Err(EnvError::UnknownTemplate(_))));
    }

    #[test]
    fn snapshot_json_roundtrip() {
        let s = load_template("text_page").unwrap();
        let back: EnvSnapshot = serde_json::from_str(&s.to_json()).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.list_controls(), s.list_controls());
    }
}
