//! SVG rendering of a trajectory over the environment layout.

use std::fmt::Write;

use serde_json::Value;

const CELL: f64 = 40.0;
const ARENA: f64 = 400.0;

fn css_color(name: &str) -> &str {
    match name {
        "blue" | "green" | "magenta" | "yellow" | "red" | "orange" | "purple" | "cyan" => name,
        _ => "gray",
    }
}

/// Renders `layout` (from `Environment::layout_json`) with the agent path
/// read from per-step `state` records; returns `None` for unknown layouts.
pub fn render(layout: &Value, states: &[Value]) -> Option<String> {
    match layout["kind"].as_str()? {
        "letterworld" => Some(render_grid(layout, states)),
        "zonesim" => Some(render_zones(layout, states)),
        _ => None,
    }
}

fn render_grid(layout: &Value, states: &[Value]) -> String {
    let n = layout["grid_size"].as_u64().unwrap_or(1) as usize;
    let side = n as f64 * CELL;
    let mut s = format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{side}\" height=\"{side}\" viewBox=\"0 0 {side} {side}\">\n");
    let _ = writeln!(s, "<rect width=\"{side}\" height=\"{side}\" fill=\"white\" stroke=\"black\"/>");
    for i in 1..n {
        let p = i as f64 * CELL;
        let _ = writeln!(s, "<line x1=\"{p}\" y1=\"0\" x2=\"{p}\" y2=\"{side}\" stroke=\"#ddd\"/>");
        let _ = writeln!(s, "<line x1=\"0\" y1=\"{p}\" x2=\"{side}\" y2=\"{p}\" stroke=\"#ddd\"/>");
    }
    for l in layout["letters"].as_array().into_iter().flatten() {
        let (r, c) = (l[0].as_f64().unwrap_or(0.0), l[1].as_f64().unwrap_or(0.0));
        let name = l[2].as_str().unwrap_or("?");
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" font-size=\"20\" text-anchor=\"middle\" font-family=\"monospace\">{name}</text>",
            (c + 0.5) * CELL,
            (r + 0.5) * CELL + 7.0
        );
    }
    let cells: Vec<(f64, f64)> = states
        .iter()
        .filter_map(|st| Some((st["agent"][0].as_f64()?, st["agent"][1].as_f64()?)))
        .collect();
    // Break the path where it wraps around the torus.
    let mut segments: Vec<Vec<(f64, f64)>> = Vec::new();
    for w in cells.iter() {
        match segments.last_mut() {
            Some(seg) if seg.last().is_some_and(|p| (p.0 - w.0).abs() + (p.1 - w.1).abs() <= 1.0) => seg.push(*w),
            _ => segments.push(vec![*w]),
        }
    }
    for seg in &segments {
        let pts: Vec<String> = seg.iter().map(|(r, c)| format!("{},{}", (c + 0.5) * CELL, (r + 0.5) * CELL)).collect();
        let _ = writeln!(s, "<polyline points=\"{}\" fill=\"none\" stroke=\"red\" stroke-width=\"3\" stroke-opacity=\"0.6\"/>", pts.join(" "));
    }
    if let Some((r, c)) = cells.first() {
        let _ = writeln!(s, "<circle cx=\"{}\" cy=\"{}\" r=\"6\" fill=\"black\"/>", (c + 0.5) * CELL, (r + 0.5) * CELL);
    }
    s.push_str("</svg>\n");
    s
}

fn render_zones(layout: &Value, states: &[Value]) -> String {
    let h = layout["half_extent"].as_f64().unwrap_or(1.0);
    let scale = ARENA / (2.0 * h);
    let x = |v: f64| (v + h) * scale;
    let y = |v: f64| (h - v) * scale;
    let mut s = format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{ARENA}\" height=\"{ARENA}\" viewBox=\"0 0 {ARENA} {ARENA}\">\n");
    let _ = writeln!(s, "<rect width=\"{ARENA}\" height=\"{ARENA}\" fill=\"white\" stroke=\"black\"/>");
    let colors: Vec<&str> = layout["colors"].as_array().into_iter().flatten().filter_map(Value::as_str).collect();
    for z in layout["zones"].as_array().into_iter().flatten() {
        let name = z["color"].as_u64().and_then(|c| colors.get(c as usize)).copied().unwrap_or("?");
        let _ = writeln!(
            s,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"{:.2}\" fill=\"{}\" fill-opacity=\"0.5\"><title>{name}</title></circle>",
            x(z["center"][0].as_f64().unwrap_or(0.0)),
            y(z["center"][1].as_f64().unwrap_or(0.0)),
            z["radius"].as_f64().unwrap_or(0.0) * scale,
            css_color(name)
        );
    }
    let pts: Vec<(f64, f64)> = states
        .iter()
        .filter_map(|st| Some((st["position"][0].as_f64()?, st["position"][1].as_f64()?)))
        .collect();
    if !pts.is_empty() {
        let p: Vec<String> = pts.iter().map(|(a, b)| format!("{:.2},{:.2}", x(*a), y(*b))).collect();
        let _ = writeln!(s, "<polyline points=\"{}\" fill=\"none\" stroke=\"black\" stroke-width=\"2\"/>", p.join(" "));
        let _ = writeln!(s, "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"black\"/>", x(pts[0].0), y(pts[0].1));
    }
    s.push_str("</svg>\n");
    s
}
