//! Grid descriptor text format.
//!
//! ```text
//! ; comment
//! width=4
//! height=2
//! gamma=0.95
//! S..A
//! .#.B
//! exit A left
//! exit B right
//! wall (0,0)-(1,0)
//! ```
//!
//! Glyphs: `.` free, `#` obstacle, `S` start, `A`–`Z` (except `S`) and
//! digits for exits. `exit` lines give each exit glyph its proposition and
//! fix the feature order. `wind=k` selects the Double Slit dynamics.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use sfplan_core::grid::{Cell, GridLayout};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LayoutErrorKind {
    #[error("no rows")]
    NoRows,
    #[error("unknown cell glyph '{0}'")]
    UnknownGlyph(char),
    #[error("row has {found} cells, expected {expected}")]
    Ragged { expected: usize, found: usize },
    #[error("duplicate exit label '{0}'")]
    DuplicateExit(char),
    #[error("more than one start cell")]
    DuplicateStart,
    #[error("header `{0}` given twice")]
    DuplicateHeader(String),
    #[error("bad value for `{key}`: {value}")]
    BadHeader { key: String, value: String },
    #[error("declared {key}={declared} but the grid has {actual}")]
    SizeMismatch { key: &'static str, declared: usize, actual: usize },
    #[error("malformed wall, expected `wall (x1,y1)-(x2,y2)`")]
    BadWall,
    #[error("malformed exit line, expected `exit <glyph> <proposition>`")]
    BadExit,
    #[error("exit '{0}' has no proposition line")]
    UnlabeledExit(char),
    #[error("exit line for '{0}' but no such cell")]
    MissingExitCell(char),
    #[error("unrecognised line")]
    Unrecognised,
    #[error("{0}")]
    Invalid(String),
}

/// Parse failure with 1-based line and column.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}, column {col}: {kind}")]
pub struct LayoutError {
    pub line: usize,
    pub col: usize,
    pub kind: LayoutErrorKind,
}

fn err(line: usize, col: usize, kind: LayoutErrorKind) -> LayoutError {
    LayoutError { line, col, kind }
}

fn is_exit_glyph(c: char) -> bool {
    (c.is_ascii_uppercase() && c != 'S') || c.is_ascii_digit()
}

fn parse_cell(text: &str) -> Option<Cell> {
    let inner = text.trim().strip_prefix('(')?.strip_suffix(')')?;
    let (x, y) = inner.split_once(',')?;
    Some(Cell::new(x.trim().parse().ok()?, y.trim().parse().ok()?))
}

/// Parses a layout. The result satisfies [`GridLayout::validate`].
pub fn load_layout(text: &str) -> Result<GridLayout, LayoutError> {
    let mut headers: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
    let mut rows: Vec<(usize, &str)> = Vec::new();
    let mut exit_lines: Vec<(usize, char, String)> = Vec::new();
    let mut walls: Vec<(usize, Cell, Cell)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim_end();
        if line.trim().is_empty() || line.trim_start().starts_with(';') {
            continue;
        }
        if let Some((key, value)) = line.split_once('=') {
            let key = key.trim();
            if !matches!(key, "width" | "height" | "gamma" | "wind") {
                return Err(err(line_no, 1, LayoutErrorKind::Unrecognised));
            }
            if headers.insert(key, (line_no, value.trim())).is_some() {
                return Err(err(line_no, 1, LayoutErrorKind::DuplicateHeader(key.into())));
            }
        } else if let Some(rest) = line.strip_prefix("wall ") {
            let (a, b) = rest.split_once(")-(").ok_or(err(line_no, 6, LayoutErrorKind::BadWall))?;
            let a = parse_cell(&format!("{a})")).ok_or(err(line_no, 6, LayoutErrorKind::BadWall))?;
            let b = parse_cell(&format!("({b}")).ok_or(err(line_no, 6, LayoutErrorKind::BadWall))?;
            walls.push((line_no, a, b));
        } else if let Some(rest) = line.strip_prefix("exit ") {
            let mut parts = rest.split_whitespace();
            let (glyph, prop) = match (parts.next(), parts.next(), parts.next()) {
                (Some(g), Some(p), None) if g.chars().count() == 1 => (g.chars().next().unwrap(), p),
                _ => return Err(err(line_no, 6, LayoutErrorKind::BadExit)),
            };
            if !is_exit_glyph(glyph) {
                return Err(err(line_no, 6, LayoutErrorKind::UnknownGlyph(glyph)));
            }
            if exit_lines.iter().any(|(_, g, _)| *g == glyph) {
                return Err(err(line_no, 6, LayoutErrorKind::DuplicateExit(glyph)));
            }
            exit_lines.push((line_no, glyph, prop.to_string()));
        } else {
            rows.push((line_no, line));
        }
    }
    if rows.is_empty() {
        return Err(err(1, 1, LayoutErrorKind::NoRows));
    }
    let width = rows[0].1.chars().count();
    let height = rows.len();
    let mut g = GridLayout::new(width, height);
    let mut exit_cells: BTreeMap<char, (usize, usize, Cell)> = BTreeMap::new();
    for (y, &(line_no, row)) in rows.iter().enumerate() {
        let found = row.chars().count();
        if found != width {
            return Err(err(line_no, found.min(width) + 1, LayoutErrorKind::Ragged { expected: width, found }));
        }
        for (x, c) in row.chars().enumerate() {
            let cell = Cell::new(x, y);
            match c {
                '.' => {}
                '#' => {
                    g.obstacles.insert(cell);
                }
                'S' => {
                    if g.start.replace(cell).is_some() {
                        return Err(err(line_no, x + 1, LayoutErrorKind::DuplicateStart));
                    }
                }
                c if is_exit_glyph(c) => {
                    if exit_cells.insert(c, (line_no, x + 1, cell)).is_some() {
                        return Err(err(line_no, x + 1, LayoutErrorKind::DuplicateExit(c)));
                    }
                }
                c => return Err(err(line_no, x + 1, LayoutErrorKind::UnknownGlyph(c))),
            }
        }
    }
    for (key, (line_no, value)) in &headers {
        let bad = || err(*line_no, 1, LayoutErrorKind::BadHeader { key: (*key).into(), value: (*value).into() });
        match *key {
            "width" | "height" => {
                let declared: usize = value.parse().map_err(|_| bad())?;
                let (key, actual) = if *key == "width" { ("width", width) } else { ("height", height) };
                if declared != actual {
                    return Err(err(*line_no, 1, LayoutErrorKind::SizeMismatch { key, declared, actual }));
                }
            }
            "gamma" => g.gamma = value.parse().map_err(|_| bad())?,
            _ => g.wind = Some(value.parse().map_err(|_| bad())?),
        }
    }
    for (line_no, glyph, prop) in &exit_lines {
        let (_, _, cell) = exit_cells.get(glyph).ok_or(err(*line_no, 6, LayoutErrorKind::MissingExitCell(*glyph)))?;
        g.add_exit(*cell, *glyph, prop);
    }
    if let Some((glyph, (line_no, col, _))) = exit_cells.iter().find(|(c, _)| !exit_lines.iter().any(|(_, g, _)| g == *c)) {
        return Err(err(*line_no, *col, LayoutErrorKind::UnlabeledExit(*glyph)));
    }
    for &(_, a, b) in &walls {
        g.add_wall(a, b);
    }
    if let Err(e) = g.validate() {
        let line_no = walls.first().map_or(rows[0].0, |w| w.0);
        return Err(err(line_no, 1, LayoutErrorKind::Invalid(e.to_string())));
    }
    Ok(g)
}

/// Writes a layout in the text format; [`load_layout`] inverts it.
pub fn serialize_layout(g: &GridLayout) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "width={}", g.width);
    let _ = writeln!(out, "height={}", g.height);
    let _ = writeln!(out, "gamma={}", g.gamma);
    if let Some(k) = g.wind {
        let _ = writeln!(out, "wind={k}");
    }
    out.push_str(&g.render());
    for e in &g.exits {
        let _ = writeln!(out, "exit {} {}", e.glyph, e.proposition);
    }
    for (a, b) in &g.walls {
        let _ = writeln!(out, "wall ({},{})-({},{})", a.x, a.y, b.x, b.y);
    }
    out
}
