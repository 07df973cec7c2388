//! Deterministic SVG rendering of summary curves: one row per domain,
//! learning on the left and planning on the right, a mean line and a
//! one-standard-deviation band per method.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{AppError, AppResult};
use crate::harness::SummaryRow;

const HEADER: [&str; 8] = ["schema", "domain", "phase", "method", "x", "mean", "std", "n"];
const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 280.0;
const MARGIN: f64 = 50.0;
const PHASES: [&str; 2] = ["learning", "planning"];

fn colour(method: &str) -> &'static str {
    match method {
        "sf-fsa-vi" => "#1f77b4",
        "lof" => "#d62728",
        "flat" => "#2ca02c",
        _ => "#7f7f7f",
    }
}

/// Parses summary CSV text, checking the header column by column.
pub fn parse_summary(text: &str) -> AppResult<Vec<SummaryRow>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    for (i, expected) in HEADER.iter().enumerate() {
        match header.get(i) {
            Some(found) if found == *expected => {}
            Some(found) => return Err(AppError::Format(format!("column {}: expected `{expected}`, found `{found}`", i + 1))),
            None => return Err(AppError::Format(format!("missing column `{expected}`"))),
        }
    }
    if header.len() > HEADER.len() {
        return Err(AppError::Format(format!("unexpected column `{}`", &header[HEADER.len()])));
    }
    let rows = reader.deserialize().collect::<Result<Vec<SummaryRow>, _>>()?;
    if rows.is_empty() {
        return Err(AppError::Format("no data rows".into()));
    }
    Ok(rows)
}

fn num(x: f64) -> String {
    format!("{x:.2}")
}

/// Renders summary rows as an SVG document.
pub fn render_svg(rows: &[SummaryRow]) -> AppResult<String> {
    if rows.is_empty() {
        return Err(AppError::Format("no data rows".into()));
    }
    // domain -> phase -> method -> points
    let mut panels: BTreeMap<&str, BTreeMap<&str, BTreeMap<&str, Vec<&SummaryRow>>>> = BTreeMap::new();
    for r in rows {
        if !PHASES.contains(&r.phase.as_str()) {
            return Err(AppError::Format(format!("unknown phase `{}`", r.phase)));
        }
        panels.entry(&r.domain).or_default().entry(&r.phase).or_default().entry(&r.method).or_default().push(r);
    }
    let width = 2.0 * (PANEL_W + MARGIN) + MARGIN;
    let height = panels.len() as f64 * (PANEL_H + MARGIN) + MARGIN;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" font-family="sans-serif" font-size="11">"#,
        num(width),
        num(height)
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (row, (domain, phases)) in panels.iter().enumerate() {
        for (col, phase) in PHASES.iter().enumerate() {
            let ox = MARGIN + col as f64 * (PANEL_W + MARGIN);
            let oy = MARGIN + row as f64 * (PANEL_H + MARGIN);
            let xlabel = if *phase == "learning" { "environment steps" } else { "planning iterations" };
            let _ = writeln!(svg, r#"<g transform="translate({},{})">"#, num(ox), num(oy));
            let _ = writeln!(svg, r#"<rect width="{}" height="{}" fill="none" stroke="black"/>"#, num(PANEL_W), num(PANEL_H));
            let _ = writeln!(svg, r#"<text x="{}" y="-8" text-anchor="middle">{domain} ({phase})</text>"#, num(PANEL_W / 2.0));
            let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">{xlabel}</text>"#, num(PANEL_W / 2.0), num(PANEL_H + 28.0));
            if let Some(methods) = phases.get(phase) {
                let pts = methods.values().flatten();
                let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
                for p in pts {
                    x0 = x0.min(p.x as f64);
                    x1 = x1.max(p.x as f64);
                    y0 = y0.min(p.mean - p.std);
                    y1 = y1.max(p.mean + p.std);
                }
                if x1 <= x0 {
                    x1 = x0 + 1.0;
                }
                if y1 <= y0 {
                    y1 = y0 + 1.0;
                }
                let sx = |x: f64| (x - x0) / (x1 - x0) * PANEL_W;
                let sy = |y: f64| PANEL_H - (y - y0) / (y1 - y0) * PANEL_H;
                let _ = writeln!(svg, r#"<text x="-4" y="{}" text-anchor="end">{}</text>"#, num(sy(y1) + 4.0), num(y1));
                let _ = writeln!(svg, r#"<text x="-4" y="{}" text-anchor="end">{}</text>"#, num(sy(y0)), num(y0));
                let _ = writeln!(svg, r#"<text x="0" y="{}">{}</text>"#, num(PANEL_H + 14.0), x0);
                let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, num(PANEL_W), num(PANEL_H + 14.0), x1);
                for (k, (method, points)) in methods.iter().enumerate() {
                    let c = colour(method);
                    let upper: Vec<String> = points.iter().map(|p| format!("{},{}", num(sx(p.x as f64)), num(sy(p.mean + p.std)))).collect();
                    let lower: Vec<String> = points.iter().rev().map(|p| format!("{},{}", num(sx(p.x as f64)), num(sy(p.mean - p.std)))).collect();
                    let _ = writeln!(svg, r#"<polygon points="{} {}" fill="{c}" fill-opacity="0.2" stroke="none"/>"#, upper.join(" "), lower.join(" "));
                    let line: Vec<String> = points.iter().map(|p| format!("{},{}", num(sx(p.x as f64)), num(sy(p.mean)))).collect();
                    let _ = writeln!(svg, r#"<polyline points="{}" fill="none" stroke="{c}" stroke-width="1.5"/>"#, line.join(" "));
                    let ly = 14.0 + 14.0 * k as f64;
                    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end" fill="{c}">{method}</text>"#, num(PANEL_W - 6.0), num(ly));
                }
            }
            let _ = writeln!(svg, "</g>");
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Parses and renders several summary files together.
pub fn render_plots(csv_texts: &[&str]) -> AppResult<String> {
    let mut rows = Vec::new();
    for t in csv_texts {
        rows.extend(parse_summary(t)?);
    }
    render_svg(&rows)
}
