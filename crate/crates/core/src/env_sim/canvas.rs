//! Document content model and its canonical markup.
//!
//! The markup is line oriented: one element per line, two-space indentation, attributes
//! in lexicographic order, optional attributes omitted when absent. `parse(render(c)) == c`
//! for every canvas.

use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Run {
    pub text: String,
    /// Six-digit hex color without `#`.
    pub color: String,
    pub highlight: Option<String>,
    /// Font size in half-points.
    pub font_size: u32,
    pub bold: bool,
}

impl Run {
    pub fn plain(text: impl Into<String>) -> Self {
        Self { text: text.into(), color: "000000".into(), highlight: None, font_size: 24, bold: false }
    }

    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Block {
    Paragraph { runs: Vec<Run> },
    /// Cells are stored row-major; `cells.len() == rows * cols`.
    Table { rows: u32, cols: u32, cells: Vec<String> },
    Figure { caption: String, source: String },
    Shape { geometry: String, fill: String },
    Chart { chart_type: String, title: String },
    Comment { author: String, anchor: String, text: String },
}

impl Block {
    pub fn kind(&self) -> &'static str {
        match self {
            Block::Paragraph { .. } => "paragraph",
            Block::Table { .. } => "table",
            Block::Figure { .. } => "figure",
            Block::Shape { .. } => "shape",
            Block::Chart { .. } => "chart",
            Block::Comment { .. } => "comment",
        }
    }

    pub fn paragraph(text: &str) -> Self {
        Block::Paragraph { runs: vec![Run::plain(text)] }
    }

    pub fn empty_table(rows: u32, cols: u32) -> Self {
        Block::Table { rows, cols, cells: vec![String::new(); (rows * cols) as usize] }
    }
}

/// A text selection inside one paragraph, in character offsets of the paragraph text.
/// It always lies inside a single run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Selection {
    pub block: usize,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CanvasState {
    pub blocks: Vec<Block>,
    pub selection: Option<Selection>,
    pub page_border: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("canvas markup line {line}: {message}")]
pub struct MarkupError {
    pub line: usize,
    pub message: String,
}

impl CanvasState {
    /// Run index and char offset of the run that fully contains `[start, end)` in a paragraph.
    pub fn run_containing(&self, block: usize, start: usize, end: usize) -> Option<(usize, usize)> {
        let Some(Block::Paragraph { runs }) = self.blocks.get(block) else { return None };
        let mut offset = 0;
        for (i, run) in runs.iter().enumerate() {
            let len = run.char_len();
            if start >= offset && end <= offset + len && start < end {
                return Some((i, offset));
            }
            offset += len;
        }
        None
    }

    /// Text currently selected, if any.
    pub fn selected_text(&self) -> Option<String> {
        let sel = self.selection?;
        let (run, offset) = self.run_containing(sel.block, sel.start, sel.end)?;
        let Block::Paragraph { runs } = &self.blocks[sel.block] else { return None };
        Some(runs[run].text.chars().skip(sel.start - offset).take(sel.end - sel.start).collect())
    }

    /// All runs with their block index, in document order.
    pub fn runs(&self) -> impl Iterator<Item = (usize, &Run)> {
        self.blocks.iter().enumerate().flat_map(|(b, block)| match block {
            Block::Paragraph { runs } => runs.iter().map(move |r| (b, r)).collect::<Vec<_>>(),
            _ => Vec::new(),
        })
    }

    pub fn to_markup(&self) -> String {
        let mut out = String::new();
        let mut root = Vec::new();
        if let Some(b) = &self.page_border {
            root.push(("page_border", b.clone()));
        }
        out.push_str(&open_tag("canvas", &root, false));
        out.push('\n');
        for block in &self.blocks {
            write_block(&mut out, block);
        }
        if let Some(sel) = self.selection {
            let attrs = [
                ("block", sel.block.to_string()),
                ("end", sel.end.to_string()),
                ("start", sel.start.to_string()),
            ];
            let _ = writeln!(out, "  {}", open_tag("selection", &attrs, true));
        }
        out.push_str("</canvas>\n");
        out
    }

    pub fn from_markup(markup: &str) -> Result<Self, MarkupError> {
        Parser::new(markup).parse()
    }
}

fn write_block(out: &mut String, block: &Block) {
    match block {
        Block::Paragraph { runs } => {
            if runs.is_empty() {
                let _ = writeln!(out, "  <paragraph/>");
                return;
            }
            let _ = writeln!(out, "  <paragraph>");
            for run in runs {
                let mut attrs = vec![
                    ("bold", run.bold.to_string()),
                    ("color", run.color.clone()),
                    ("font_size", run.font_size.to_string()),
                ];
                if let Some(h) = &run.highlight {
                    attrs.push(("highlight", h.clone()));
                }
                let _ = writeln!(out, "    {}{}</run>", open_tag("run", &attrs, false), escape(&run.text));
            }
            let _ = writeln!(out, "  </paragraph>");
        }
        Block::Table { rows, cols, cells } => {
            let attrs = [("cols", cols.to_string()), ("rows", rows.to_string())];
            let _ = writeln!(out, "  {}", open_tag("table", &attrs, false));
            for cell in cells {
                let _ = writeln!(out, "    <cell>{}</cell>", escape(cell));
            }
            let _ = writeln!(out, "  </table>");
        }
        Block::Figure { caption, source } => {
            let attrs = [("caption", caption.clone()), ("source", source.clone())];
            let _ = writeln!(out, "  {}", open_tag("figure", &attrs, true));
        }
        Block::Shape { geometry, fill } => {
            let attrs = [("fill", fill.clone()), ("geometry", geometry.clone())];
            let _ = writeln!(out, "  {}", open_tag("shape", &attrs, true));
        }
        Block::Chart { chart_type, title } => {
            let attrs = [("chart_type", chart_type.clone()), ("title", title.clone())];
            let _ = writeln!(out, "  {}", open_tag("chart", &attrs, true));
        }
        Block::Comment { author, anchor, text } => {
            let attrs = [("anchor", anchor.clone()), ("author", author.clone())];
            let _ = writeln!(out, "  {}{}</comment>", open_tag("comment", &attrs, false), escape(text));
        }
    }
}

fn open_tag(name: &str, attrs: &[(&str, String)], self_closing: bool) -> String {
    debug_assert!(attrs.windows(2).all(|w| w[0].0 < w[1].0), "attributes must be sorted");
    let mut s = format!("<{name}");
    for (k, v) in attrs {
        let _ = write!(s, " {k}=\"{}\"", escape(v));
    }
    s.push_str(if self_closing { "/>" } else { ">" });
    s
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\n' => out.push_str("&#10;"),
            '\r' => out.push_str("&#13;"),
            '\t' => out.push_str("&#9;"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(text: &str) -> Result<String, String> {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(pos) = rest.find('&') {
        out.push_str(&rest[..pos]);
        let tail = &rest[pos..];
        let end = tail.find(';').ok_or_else(|| "unterminated entity".to_string())?;
        let entity = &tail[1..end];
        let c = match entity {
            "amp" => '&',
            "lt" => '<',
            "gt" => '>',
            "quot" => '"',
            "#10" => '\n',
            "#13" => '\r',
            "#9" => '\t',
            other => return Err(format!("unknown entity `&{other};`")),
        };
        out.push(c);
        rest = &tail[end + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

/// One parsed markup line.
#[derive(Debug)]
enum Line {
    Open { name: String, attrs: Vec<(String, String)> },
    SelfClosing { name: String, attrs: Vec<(String, String)> },
    Element { name: String, attrs: Vec<(String, String)>, text: String },
    Close { name: String },
}

struct Parser<'a> {
    lines: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(markup: &'a str) -> Self {
        let lines = markup
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| (i + 1, l.trim()))
            .collect();
        Self { lines, pos: 0 }
    }

    fn err(&self, message: impl Into<String>) -> MarkupError {
        let line = self.lines.get(self.pos).map(|l| l.0).unwrap_or(0);
        MarkupError { line, message: message.into() }
    }

    fn next(&mut self) -> Result<Line, MarkupError> {
        let (_, raw) = *self.lines.get(self.pos).ok_or_else(|| self.err("unexpected end of markup"))?;
        let parsed = parse_line(raw).map_err(|m| self.err(m))?;
        self.pos += 1;
        Ok(parsed)
    }

    fn parse(mut self) -> Result<CanvasState, MarkupError> {
        let mut canvas = CanvasState::default();
        match self.next()? {
            Line::Open { name, attrs } if name == "canvas" => {
                let mut attrs = Attrs::new(attrs);
                canvas.page_border = attrs.optional("page_border");
                attrs.finish().map_err(|m| self.err(m))?;
            }
            Line::SelfClosing { name, attrs } if name == "canvas" => {
                let mut attrs = Attrs::new(attrs);
                canvas.page_border = attrs.optional("page_border");
                attrs.finish().map_err(|m| self.err(m))?;
                return self.expect_end(canvas);
            }
            _ => return Err(self.err("expected <canvas>")),
        }
        loop {
            let line = self.next()?;
            match line {
                Line::Close { name } if name == "canvas" => break,
                Line::SelfClosing { name, attrs } if name == "selection" => {
                    let mut a = Attrs::new(attrs);
                    let sel = Selection {
                        block: a.number("block").map_err(|m| self.err(m))?,
                        start: a.number("start").map_err(|m| self.err(m))?,
                        end: a.number("end").map_err(|m| self.err(m))?,
                    };
                    a.finish().map_err(|m| self.err(m))?;
                    canvas.selection = Some(sel);
                }
                other => {
                    if canvas.selection.is_some() {
                        return Err(self.err("blocks must precede the selection"));
                    }
                    let block = self.block(other)?;
                    canvas.blocks.push(block);
                }
            }
        }
        if let Some(sel) = canvas.selection {
            if canvas.run_containing(sel.block, sel.start, sel.end).is_none() {
                return Err(self.err("selection does not lie within a single run"));
            }
        }
        self.expect_end(canvas)
    }

    fn expect_end(&self, canvas: CanvasState) -> Result<CanvasState, MarkupError> {
        if self.pos != self.lines.len() {
            return Err(self.err("trailing content after </canvas>"));
        }
        Ok(canvas)
    }

    fn block(&mut self, line: Line) -> Result<Block, MarkupError> {
        let block = match line {
            Line::SelfClosing { name, attrs } => {
                let mut a = Attrs::new(attrs);
                let block = match name.as_str() {
                    "paragraph" => Block::Paragraph { runs: Vec::new() },
                    "figure" => Block::Figure {
                        caption: a.required("caption").map_err(|m| self.err(m))?,
                        source: a.required("source").map_err(|m| self.err(m))?,
                    },
                    "shape" => Block::Shape {
                        geometry: a.required("geometry").map_err(|m| self.err(m))?,
                        fill: a.required("fill").map_err(|m| self.err(m))?,
                    },
                    "chart" => Block::Chart {
                        chart_type: a.required("chart_type").map_err(|m| self.err(m))?,
                        title: a.required("title").map_err(|m| self.err(m))?,
                    },
                    other => return Err(self.err(format!("unexpected element <{other}/>"))),
                };
                a.finish().map_err(|m| self.err(m))?;
                block
            }
            Line::Element { name, attrs, text } if name == "comment" => {
                let mut a = Attrs::new(attrs);
                let block = Block::Comment {
                    author: a.required("author").map_err(|m| self.err(m))?,
                    anchor: a.required("anchor").map_err(|m| self.err(m))?,
                    text,
                };
                a.finish().map_err(|m| self.err(m))?;
                block
            }
            Line::Open { name, attrs } if name == "paragraph" => {
                Attrs::new(attrs).finish().map_err(|m| self.err(m))?;
                let mut runs = Vec::new();
                loop {
                    match self.next()? {
                        Line::Close { name } if name == "paragraph" => break,
                        Line::Element { name, attrs, text } if name == "run" => {
                            let mut a = Attrs::new(attrs);
                            let run = Run {
                                text,
                                bold: a.boolean("bold").map_err(|m| self.err(m))?,
                                color: a.required("color").map_err(|m| self.err(m))?,
                                font_size: a.number("font_size").map_err(|m| self.err(m))?,
                                highlight: a.optional("highlight"),
                            };
                            a.finish().map_err(|m| self.err(m))?;
                            runs.push(run);
                        }
                        _ => return Err(self.err("expected <run> or </paragraph>")),
                    }
                }
                if runs.is_empty() {
                    return Err(self.err("empty paragraph must be written as <paragraph/>"));
                }
                Block::Paragraph { runs }
            }
            Line::Open { name, attrs } if name == "table" => {
                let mut a = Attrs::new(attrs);
                let rows: u32 = a.number("rows").map_err(|m| self.err(m))?;
                let cols: u32 = a.number("cols").map_err(|m| self.err(m))?;
                a.finish().map_err(|m| self.err(m))?;
                let mut cells = Vec::new();
                loop {
                    match self.next()? {
                        Line::Close { name } if name == "table" => break,
                        Line::Element { name, attrs, text } if name == "cell" && attrs.is_empty() => {
                            cells.push(text)
                        }
                        _ => return Err(self.err("expected <cell> or </table>")),
                    }
                }
                if cells.len() != (rows * cols) as usize {
                    return Err(self.err(format!("table {rows}x{cols} has {} cells", cells.len())));
                }
                Block::Table { rows, cols, cells }
            }
            other => return Err(self.err(format!("unexpected {other:?}"))),
        };
        Ok(block)
    }
}

struct Attrs(Vec<(String, String)>);

impl Attrs {
    fn new(attrs: Vec<(String, String)>) -> Self {
        Self(attrs)
    }

    fn optional(&mut self, key: &str) -> Option<String> {
        let idx = self.0.iter().position(|(k, _)| k == key)?;
        Some(self.0.remove(idx).1)
    }

    fn required(&mut self, key: &str) -> Result<String, String> {
        self.optional(key).ok_or_else(|| format!("missing attribute `{key}`"))
    }

    fn number<T: std::str::FromStr>(&mut self, key: &str) -> Result<T, String> {
        let raw = self.required(key)?;
        raw.parse().map_err(|_| format!("attribute `{key}` is not a number: {raw}"))
    }

    fn boolean(&mut self, key: &str) -> Result<bool, String> {
        match self.required(key)?.as_str() {
            "true" => Ok(true),
            "false" => Ok(false),
            other => Err(format!("attribute `{key}` is not a boolean: {other}")),
        }
    }

    fn finish(self) -> Result<(), String> {
        match self.0.first() {
            None => Ok(()),
            Some((k, _)) => Err(format!("unexpected attribute `{k}`")),
        }
    }
}

fn parse_line(raw: &str) -> Result<Line, String> {
    if let Some(rest) = raw.strip_prefix("</") {
        let name = rest.strip_suffix('>').ok_or("malformed closing tag")?;
        return Ok(Line::Close { name: name.to_string() });
    }
    let rest = raw.strip_prefix('<').ok_or("line does not start with a tag")?;
    let (name, mut rest) = split_name(rest);
    let mut attrs: Vec<(String, String)> = Vec::new();
    loop {
        rest = rest.trim_start();
        if let Some(after) = rest.strip_prefix("/>") {
            if !after.is_empty() {
                return Err("content after self-closing tag".into());
            }
            return Ok(Line::SelfClosing { name, attrs });
        }
        if let Some(after) = rest.strip_prefix('>') {
            if after.is_empty() {
                return Ok(Line::Open { name, attrs });
            }
            let close = format!("</{name}>");
            let text = after.strip_suffix(&close).ok_or_else(|| format!("missing {close}"))?;
            if text.contains('<') {
                return Err("unescaped `<` in text".into());
            }
            return Ok(Line::Element { name, attrs, text: unescape(text)? });
        }
        let eq = rest.find("=\"").ok_or("malformed attribute")?;
        let key = rest[..eq].to_string();
        let value_start = &rest[eq + 2..];
        let close = value_start.find('"').ok_or("unterminated attribute value")?;
        let value = unescape(&value_start[..close])?;
        if let Some((prev, _)) = attrs.last() {
            if *prev >= key {
                return Err(format!("attribute `{key}` out of order"));
            }
        }
        attrs.push((key, value));
        rest = &value_start[close + 1..];
    }
}

fn split_name(s: &str) -> (String, &str) {
    let end = s.find([' ', '>', '/']).unwrap_or(s.len());
    (s[..end].to_string(), &s[end..])
}
