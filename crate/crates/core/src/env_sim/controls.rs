use serde::{Deserialize, Serialize};
use std::fmt;

/// The actionable control kinds exposed by the simulated application.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ControlType {
    Button,
    Edit,
    TabItem,
    ListItem,
    MenuItem,
    ScrollBar,
    TreeItem,
    Document,
    Hyperlink,
    ComboBox,
}

impl ControlType {
    pub const ALL: [ControlType; 10] = [
        ControlType::Button,
        ControlType::Edit,
        ControlType::TabItem,
        ControlType::ListItem,
        ControlType::MenuItem,
        ControlType::ScrollBar,
        ControlType::TreeItem,
        ControlType::Document,
        ControlType::Hyperlink,
        ControlType::ComboBox,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ControlType::Button => "Button",
            ControlType::Edit => "Edit",
            ControlType::TabItem => "TabItem",
            ControlType::ListItem => "ListItem",
            ControlType::MenuItem => "MenuItem",
            ControlType::ScrollBar => "ScrollBar",
            ControlType::TreeItem => "TreeItem",
            ControlType::Document => "Document",
            ControlType::Hyperlink => "Hyperlink",
            ControlType::ComboBox => "ComboBox",
        }
    }
}

impl fmt::Display for ControlType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One node of the application's control tree.
///
/// `label` is assigned by [`relabel`]: enabled controls reachable through enabled
/// ancestors are numbered "1", "2", ... in depth-first order; every other node has an
/// empty label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlNode {
    #[serde(default)]
    pub label: String,
    pub control_text: String,
    pub control_type: ControlType,
    /// `None` when the selection state is unknown.
    #[serde(default)]
    pub selected: Option<bool>,
    #[serde(default = "default_true")]
    pub enabled: bool,
    /// Current content of edit boxes, combo boxes and scroll bars.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<ControlNode>,
}

fn default_true() -> bool {
    true
}

impl ControlNode {
    pub fn new(control_text: impl Into<String>, control_type: ControlType) -> Self {
        Self {
            label: String::new(),
            control_text: control_text.into(),
            control_type,
            selected: None,
            enabled: true,
            value: None,
            children: Vec::new(),
        }
    }

    pub fn with_children(mut self, children: Vec<ControlNode>) -> Self {
        self.children = children;
        self
    }

    pub fn disabled(mut self) -> Self {
        self.enabled = false;
        self
    }
}

/// Flat view of a listed control, as handed to models and prompts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlView {
    pub label: String,
    pub control_text: String,
    pub control_type: ControlType,
}

/// Assigns labels in depth-first visit order over enabled nodes. Disabled subtrees are
/// not visited and keep empty labels.
pub fn relabel(forest: &mut [ControlNode]) {
    fn clear(node: &mut ControlNode) {
        node.label.clear();
        node.children.iter_mut().for_each(clear);
    }
    fn visit(node: &mut ControlNode, next: &mut usize) {
        if !node.enabled {
            clear(node);
            return;
        }
        node.label = next.to_string();
        *next += 1;
        for child in &mut node.children {
            visit(child, next);
        }
    }
    let mut next = 1;
    for node in forest.iter_mut() {
        visit(node, &mut next);
    }
}

/// Depth-first flattening of the enabled controls of a labeled forest.
pub fn flatten(forest: &[ControlNode]) -> Vec<ControlView> {
    fn visit(node: &ControlNode, out: &mut Vec<ControlView>) {
        if !node.enabled {
            return;
        }
        out.push(ControlView {
            label: node.label.clone(),
            control_text: node.control_text.clone(),
            control_type: node.control_type,
        });
        for child in &node.children {
            visit(child, out);
        }
    }
    let mut out = Vec::new();
    for node in forest {
        visit(node, &mut out);
    }
    out
}

/// Path of child indices from the forest root to a node.
pub type NodePath = Vec<usize>;

pub fn node_at<'a>(forest: &'a [ControlNode], path: &[usize]) -> &'a ControlNode {
    let mut node = &forest[path[0]];
    for &i in &path[1..] {
        node = &node.children[i];
    }
    node
}

pub fn node_at_mut<'a>(forest: &'a mut [ControlNode], path: &[usize]) -> &'a mut ControlNode {
    let mut node = &mut forest[path[0]];
    for &i in &path[1..] {
        node = &mut node.children[i];
    }
    node
}

/// Every node with its path, in depth-first order, disabled ones included.
pub fn walk(forest: &[ControlNode]) -> Vec<(NodePath, &ControlNode)> {
    fn visit<'a>(node: &'a ControlNode, path: NodePath, out: &mut Vec<(NodePath, &'a ControlNode)>) {
        out.push((path.clone(), node));
        for (i, child) in node.children.iter().enumerate() {
            let mut p = path.clone();
            p.push(i);
            visit(child, p, out);
        }
    }
    let mut out = Vec::new();
    for (i, node) in forest.iter().enumerate() {
        visit(node, vec![i], &mut out);
    }
    out
}

/// The nested `{control_label, control_text, control_type, selected, children}` view of
/// enabled controls used in prompts.
pub fn tree_json(forest: &[ControlNode]) -> serde_json::Value {
    fn node_json(node: &ControlNode) -> Option<serde_json::Value> {
        if !node.enabled {
            return None;
        }
        let children: Vec<_> = node.children.iter().filter_map(node_json).collect();
        Some(serde_json::json!({
            "control_label": node.label,
            "control_text": node.control_text,
            "control_type": node.control_type.as_str(),
            "selected": node.selected,
            "children": children,
        }))
    }
    serde_json::Value::Array(forest.iter().filter_map(node_json).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<ControlNode> {
        vec![
            ControlNode::new("Home", ControlType::TabItem).with_children(vec![
                ControlNode::new("Bold", ControlType::Button),
                ControlNode::new("Italic", ControlType::Button).disabled(),
            ]),
            ControlNode::new("Document", ControlType::Document),
        ]
    }

    #[test]
    fn labels_follow_visit_order_and_skip_disabled() {
        let mut forest = sample();
        relabel(&mut forest);
        let listed = flatten(&forest);
        let labels: Vec<_> = listed.iter().map(|c| c.label.as_str()).collect();
        let texts: Vec<_> = listed.iter().map(|c| c.control_text.as_str()).collect();
        assert_eq!(labels, vec!["1", "2", "3"]);
        assert_eq!(texts, vec!["Home", "Bold", "Document"]);
        assert_eq!(forest[0].children[1].label, "");
    }

    #[test]
    fn disabled_parent_hides_subtree() {
        let mut forest = sample();
        forest[0].enabled = false;
        relabel(&mut forest);
        assert_eq!(flatten(&forest).len(), 1);
        assert_eq!(forest[0].children[0].label, "");
    }
}
