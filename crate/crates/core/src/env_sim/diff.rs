//! Attribute-level canvas differences.
//!
//! A canvas flattens to a map from structured paths (`blocks[0].runs[1].highlight`) to
//! scalar strings. A diff lists the paths whose values differ, sorted by path, and
//! applying it to the old canvas rebuilds the new one.

use super::canvas::{Block, CanvasState, Run, Selection};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffEntry {
    pub path: String,
    pub before: Option<String>,
    pub after: Option<String>,
}

pub type CanvasDiff = Vec<DiffEntry>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DiffError {
    #[error("malformed canvas path `{0}`")]
    BadPath(String),
    #[error("diff does not apply: {0}")]
    Conflict(String),
    #[error("flattened canvas is inconsistent: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Seg {
    Index(usize),
    Field(String),
}

/// A parsed path, ordered segment by segment so `blocks[10]` sorts after `blocks[2]`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct CanvasPath(Vec<Seg>);

impl CanvasPath {
    pub fn parse(raw: &str) -> Result<Self, DiffError> {
        let bad = || DiffError::BadPath(raw.to_string());
        let mut segs = Vec::new();
        for part in raw.split('.') {
            let (name, mut rest) = match part.find('[') {
                Some(i) => (&part[..i], &part[i..]),
                None => (part, ""),
            };
            if name.is_empty() {
                return Err(bad());
            }
            segs.push(Seg::Field(name.to_string()));
            while !rest.is_empty() {
                let close = rest.find(']').ok_or_else(bad)?;
                let idx = rest[1..close].parse().map_err(|_| bad())?;
                segs.push(Seg::Index(idx));
                rest = &rest[close + 1..];
                if !rest.is_empty() && !rest.starts_with('[') {
                    return Err(bad());
                }
            }
        }
        Ok(Self(segs))
    }
}

impl fmt::Display for CanvasPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, seg) in self.0.iter().enumerate() {
            match seg {
                Seg::Field(name) if i == 0 => write!(f, "{name}")?,
                Seg::Field(name) => write!(f, ".{name}")?,
                Seg::Index(n) => write!(f, "[{n}]")?,
            }
        }
        Ok(())
    }
}

fn block_path(i: usize, field: &str) -> CanvasPath {
    CanvasPath(vec![Seg::Field("blocks".into()), Seg::Index(i), Seg::Field(field.into())])
}

fn indexed_path(i: usize, list: &str, j: usize, field: Option<&str>) -> CanvasPath {
    let mut segs = vec![
        Seg::Field("blocks".into()),
        Seg::Index(i),
        Seg::Field(list.into()),
        Seg::Index(j),
    ];
    if let Some(f) = field {
        segs.push(Seg::Field(f.into()));
    }
    CanvasPath(segs)
}

/// Every scalar of the canvas keyed by its path.
pub fn flatten(canvas: &CanvasState) -> BTreeMap<CanvasPath, String> {
    let mut map = BTreeMap::new();
    if let Some(b) = &canvas.page_border {
        map.insert(CanvasPath(vec![Seg::Field("page_border".into())]), b.clone());
    }
    if let Some(sel) = canvas.selection {
        for (name, v) in [("block", sel.block), ("end", sel.end), ("start", sel.start)] {
            map.insert(
                CanvasPath(vec![Seg::Field("selection".into()), Seg::Field(name.into())]),
                v.to_string(),
            );
        }
    }
    for (i, block) in canvas.blocks.iter().enumerate() {
        map.insert(block_path(i, "kind"), block.kind().to_string());
        match block {
            Block::Paragraph { runs } => {
                for (j, run) in runs.iter().enumerate() {
                    let p = |f: &str| indexed_path(i, "runs", j, Some(f));
                    map.insert(p("bold"), run.bold.to_string());
                    map.insert(p("color"), run.color.clone());
                    map.insert(p("font_size"), run.font_size.to_string());
                    if let Some(h) = &run.highlight {
                        map.insert(p("highlight"), h.clone());
                    }
                    map.insert(p("text"), run.text.clone());
                }
            }
            Block::Table { rows, cols, cells } => {
                map.insert(block_path(i, "rows"), rows.to_string());
                map.insert(block_path(i, "cols"), cols.to_string());
                for (k, cell) in cells.iter().enumerate() {
                    map.insert(indexed_path(i, "cells", k, None), cell.clone());
                }
            }
            Block::Figure { caption, source } => {
                map.insert(block_path(i, "caption"), caption.clone());
                map.insert(block_path(i, "source"), source.clone());
            }
            Block::Shape { geometry, fill } => {
                map.insert(block_path(i, "geometry"), geometry.clone());
                map.insert(block_path(i, "fill"), fill.clone());
            }
            Block::Chart { chart_type, title } => {
                map.insert(block_path(i, "chart_type"), chart_type.clone());
                map.insert(block_path(i, "title"), title.clone());
            }
            Block::Comment { author, anchor, text } => {
                map.insert(block_path(i, "author"), author.clone());
                map.insert(block_path(i, "anchor"), anchor.clone());
                map.insert(block_path(i, "text"), text.clone());
            }
        }
    }
    map
}

/// Rebuilds a canvas from its flattened form.
pub fn unflatten(map: &BTreeMap<CanvasPath, String>) -> Result<CanvasState, DiffError> {
    let inconsistent = |m: String| DiffError::Inconsistent(m);
    let mut canvas = CanvasState::default();
    let mut sel: BTreeMap<String, usize> = BTreeMap::new();
    // per block: scalar fields and indexed children
    let mut fields: BTreeMap<usize, BTreeMap<String, String>> = BTreeMap::new();
    let mut items: BTreeMap<usize, BTreeMap<usize, BTreeMap<String, String>>> = BTreeMap::new();

    for (path, value) in map {
        match path.0.as_slice() {
            [Seg::Field(f)] if f == "page_border" => canvas.page_border = Some(value.clone()),
            [Seg::Field(f), Seg::Field(k)] if f == "selection" => {
                let n = value.parse().map_err(|_| inconsistent(format!("{path} = {value}")))?;
                sel.insert(k.clone(), n);
            }
            [Seg::Field(f), Seg::Index(i), Seg::Field(k)] if f == "blocks" => {
                fields.entry(*i).or_default().insert(k.clone(), value.clone());
            }
            [Seg::Field(f), Seg::Index(i), Seg::Field(list), Seg::Index(j), rest @ ..] if f == "blocks" => {
                let key = match rest {
                    [] => list.clone(),
                    [Seg::Field(k)] => k.clone(),
                    _ => return Err(DiffError::BadPath(path.to_string())),
                };
                items.entry(*i).or_default().entry(*j).or_default().insert(key, value.clone());
            }
            _ => return Err(DiffError::BadPath(path.to_string())),
        }
    }

    if !sel.is_empty() {
        let get = |k: &str| sel.get(k).copied().ok_or_else(|| inconsistent(format!("selection.{k} missing")));
        canvas.selection = Some(Selection { block: get("block")?, start: get("start")?, end: get("end")? });
    }

    let count = fields.keys().next_back().map_or(0, |i| i + 1);
    for i in 0..count {
        let f = fields.remove(&i).ok_or_else(|| inconsistent(format!("block {i} missing")))?;
        let children = items.remove(&i).unwrap_or_default();
        canvas.blocks.push(build_block(i, f, children)?);
    }
    if let Some(i) = items.keys().next() {
        return Err(inconsistent(format!("items for missing block {i}")));
    }
    Ok(canvas)
}

fn build_block(
    i: usize,
    mut f: BTreeMap<String, String>,
    children: BTreeMap<usize, BTreeMap<String, String>>,
) -> Result<Block, DiffError> {
    let err = |m: &str| DiffError::Inconsistent(format!("block {i}: {m}"));
    let mut take = |k: &str| f.remove(k).ok_or_else(|| err(&format!("`{k}` missing")));
    let kind = take("kind")?;
    let dense = |n: usize| children.keys().copied().eq(0..n);
    let block = match kind.as_str() {
        "paragraph" => {
            if !dense(children.len()) {
                return Err(err("run indices not contiguous"));
            }
            let mut runs = Vec::new();
            for (_, mut r) in children {
                let mut get = |k: &str| r.remove(k).ok_or_else(|| err(&format!("run `{k}` missing")));
                let run = Run {
                    text: get("text")?,
                    color: get("color")?,
                    font_size: get("font_size")?.parse().map_err(|_| err("bad font_size"))?,
                    bold: get("bold")?.parse().map_err(|_| err("bad bold"))?,
                    highlight: r.remove("highlight"),
                };
                if !r.is_empty() {
                    return Err(err("unknown run field"));
                }
                runs.push(run);
            }
            Block::Paragraph { runs }
        }
        "table" => {
            let rows: u32 = take("rows")?.parse().map_err(|_| err("bad rows"))?;
            let cols: u32 = take("cols")?.parse().map_err(|_| err("bad cols"))?;
            let n = (rows * cols) as usize;
            if children.len() != n || !dense(n) {
                return Err(err("cell count does not match dimensions"));
            }
            let cells = children
                .into_values()
                .map(|mut c| c.remove("cells").ok_or_else(|| err("bad cell")))
                .collect::<Result<_, _>>()?;
            Block::Table { rows, cols, cells }
        }
        "figure" => Block::Figure { caption: take("caption")?, source: take("source")? },
        "shape" => Block::Shape { geometry: take("geometry")?, fill: take("fill")? },
        "chart" => Block::Chart { chart_type: take("chart_type")?, title: take("title")? },
        "comment" => Block::Comment { author: take("author")?, anchor: take("anchor")?, text: take("text")? },
        other => return Err(err(&format!("unknown kind `{other}`"))),
    };
    if !f.is_empty() {
        return Err(err("unexpected fields"));
    }
    Ok(block)
}

/// Path-sorted entries for every scalar that differs between the two canvases.
pub fn diff_canvas(before: &CanvasState, after: &CanvasState) -> CanvasDiff {
    let a = flatten(before);
    let b = flatten(after);
    let mut paths: Vec<&CanvasPath> = a.keys().chain(b.keys()).collect();
    paths.sort();
    paths.dedup();
    paths
        .into_iter()
        .filter_map(|p| {
            let (x, y) = (a.get(p), b.get(p));
            (x != y).then(|| DiffEntry { path: p.to_string(), before: x.cloned(), after: y.cloned() })
        })
        .collect()
}

/// Applies a diff recorded against `before`. Every entry's `before` value must match.
pub fn apply_diff(before: &CanvasState, diff: &[DiffEntry]) -> Result<CanvasState, DiffError> {
    let mut map = flatten(before);
    for entry in diff {
        let path = CanvasPath::parse(&entry.path)?;
        if map.get(&path) != entry.before.as_ref() {
            return Err(DiffError::Conflict(entry.path.clone()));
        }
        match &entry.after {
            Some(v) => map.insert(path, v.clone()),
            None => map.remove(&path),
        };
    }
    unflatten(&map)
}

/// One line per entry, `path: before -> after`, with `-` for absent values.
pub fn describe(diff: &[DiffEntry]) -> String {
    let show = |v: &Option<String>| v.clone().unwrap_or_else(|| "-".into());
    diff.iter()
        .map(|e| format!("{}: {} -> {}\n", e.path, show(&e.before), show(&e.after)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc() -> CanvasState {
        CanvasState {
            blocks: vec![
                Block::Paragraph { runs: vec![Run::plain("hello world")] },
                Block::empty_table(1, 2),
            ],
            selection: None,
            page_border: None,
        }
    }

    #[test]
    fn identical_is_empty() {
        assert!(diff_canvas(&doc(), &doc()).is_empty());
    }

    #[test]
    fn highlight_is_single_entry() {
        let mut after = doc();
        if let Block::Paragraph { runs } = &mut after.blocks[0] {
            runs[0].highlight = Some("yellow".into());
        }
        let d = diff_canvas(&doc(), &after);
        assert_eq!(
            d,
            vec![DiffEntry {
                path: "blocks[0].runs[0].highlight".into(),
                before: None,
                after: Some("yellow".into())
            }]
        );
        assert_eq!(apply_diff(&doc(), &d).unwrap(), after);
    }

    #[test]
    fn font_size_change() {
        let mut after = doc();
        if let Block::Paragraph { runs } = &mut after.blocks[0] {
            runs[0].font_size = 28;
        }
        let d = diff_canvas(&doc(), &after);
        assert_eq!(d.len(), 1);
        assert_eq!((d[0].before.as_deref(), d[0].after.as_deref()), (Some("24"), Some("28")));
    }

    #[test]
    fn numeric_path_order() {
        let mut a = CanvasState::default();
        for i in 0..12 {
            a.blocks.push(Block::paragraph(&format!("p{i}")));
        }
        let mut b = a.clone();
        for block in &mut b.blocks {
            if let Block::Paragraph { runs } = block {
                runs[0].bold = true;
            }
        }
        let d = diff_canvas(&a, &b);
        assert_eq!(d[2].path, "blocks[2].runs[0].bold");
        assert_eq!(d[10].path, "blocks[10].runs[0].bold");
    }

    #[test]
    fn apply_reconstructs_structural_changes() {
        let before = doc();
        let mut after = doc();
        after.blocks.insert(1, Block::Chart { chart_type: "bar".into(), title: "Chart".into() });
        after.selection = Some(Selection { block: 0, start: 0, end: 5 });
        after.page_border = Some("box".into());
        let d = diff_canvas(&before, &after);
        assert_eq!(apply_diff(&before, &d).unwrap(), after);
    }

    #[test]
    fn stale_diff_conflicts() {
        let d = vec![DiffEntry { path: "page_border".into(), before: Some("box".into()), after: None }];
        assert!(matches!(apply_diff(&doc(), &d), Err(DiffError::Conflict(_))));
    }

    #[test]
    fn path_parse_roundtrip() {
        for raw in ["page_border", "selection.start", "blocks[3].runs[12].text", "blocks[1].cells[4]"] {
            assert_eq!(CanvasPath::parse(raw).unwrap().to_string(), raw);
        }
        assert!(CanvasPath::parse("blocks[x]").is_err());
    }
}
