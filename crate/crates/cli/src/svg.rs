//! Deterministic SVG rendering of reports on a fixed 800×800 canvas.
//!
//! Open sets are outlined by marching squares on their membership
//! indicator, with crossings refined by bisection along cell edges.
//! Curves and patches are drawn as boundary sample dots.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use anyhow::{anyhow, bail, Result};
use rayon::prelude::*;
use regproj::sets::{boundary_sample, Aabb, DefinableSet, SetKind};
use serde_json::Value;

use crate::run::{cover_of, Report};
use crate::scenario::Scenario;

pub const CANVAS: f64 = 800.0;
const MARGIN: f64 = 60.0;
const RASTER: usize = 120;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];

/// Square world window mapped onto the canvas, `y` pointing up.
struct Frame {
    lo: [f64; 2],
    side: f64,
}

impl Frame {
    fn around(b: &Aabb, pad: f64) -> Frame {
        let w = (b.hi[0] - b.lo[0]).max(b.hi[1] - b.lo[1]).max(1e-9);
        let side = w * (1.0 + 2.0 * pad);
        let cx = 0.5 * (b.lo[0] + b.hi[0]);
        let cy = 0.5 * (b.lo[1] + b.hi[1]);
        Frame { lo: [cx - 0.5 * side, cy - 0.5 * side], side }
    }

    fn px(&self, p: [f64; 2]) -> (f64, f64) {
        let s = (CANVAS - 2.0 * MARGIN) / self.side;
        (MARGIN + (p[0] - self.lo[0]) * s, CANVAS - MARGIN - (p[1] - self.lo[1]) * s)
    }

    fn world(&self, i: usize, j: usize, n: usize) -> [f64; 2] {
        [self.lo[0] + self.side * i as f64 / n as f64, self.lo[1] + self.side * j as f64 / n as f64]
    }
}

struct Canvas {
    body: String,
    legend: Vec<(String, String)>,
}

impl Canvas {
    fn new() -> Self {
        Canvas { body: String::new(), legend: Vec::new() }
    }

    fn polyline(&mut self, frame: &Frame, pts: &[[f64; 2]], closed: bool, color: &str, extra: &str) {
        let coords: Vec<String> = pts
            .iter()
            .map(|p| {
                let (x, y) = frame.px(*p);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let tag = if closed { "polygon" } else { "polyline" };
        let _ = writeln!(self.body, r#"<{tag} points="{}" fill="none" stroke="{color}" stroke-width="1.5"{extra}/>"#, coords.join(" "));
    }

    fn dot(&mut self, frame: &Frame, p: [f64; 2], r: f64, color: &str) {
        let (x, y) = frame.px(p);
        let _ = writeln!(self.body, r#"<circle cx="{x:.2}" cy="{y:.2}" r="{r}" fill="{color}"/>"#);
    }

    fn cross(&mut self, frame: &Frame, p: [f64; 2], color: &str) {
        let (x, y) = frame.px(p);
        let _ = writeln!(
            self.body,
            r#"<path d="M{:.2},{:.2}L{:.2},{:.2}M{:.2},{:.2}L{:.2},{:.2}" stroke="{color}" stroke-width="2.5"/>"#,
            x - 7.0,
            y - 7.0,
            x + 7.0,
            y + 7.0,
            x - 7.0,
            y + 7.0,
            x + 7.0,
            y - 7.0
        );
    }

    fn finish(self, title: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{c}" height="{c}" viewBox="0 0 {c} {c}">"#, c = CANVAS);
        let _ = writeln!(out, r#"<rect width="{c}" height="{c}" fill="white"/>"#, c = CANVAS);
        let _ = writeln!(out, r#"<text x="{MARGIN}" y="30" font-family="sans-serif" font-size="16">{}</text>"#, escape(title));
        out.push_str(&self.body);
        for (k, (label, color)) in self.legend.iter().enumerate() {
            let y = CANVAS - MARGIN + 16.0 + 12.0 * (k / 4) as f64;
            let x = MARGIN + 175.0 * (k % 4) as f64;
            let _ = writeln!(out, r#"<rect x="{x}" y="{:.0}" width="10" height="10" fill="{color}"/>"#, y - 9.0);
            let _ =
                writeln!(out, r#"<text x="{:.0}" y="{y:.0}" font-family="sans-serif" font-size="10">{}</text>"#, x + 14.0, escape(label));
        }
        out.push_str("</svg>\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn is_open(set: &DefinableSet) -> bool {
    match set.kind() {
        SetKind::SignCondition(sc) => !sc.has_equality(),
        SetKind::Band(_) => true,
        SetKind::Union(ms) => ms.iter().all(is_open),
        SetKind::Patch(_) => false,
    }
}

/// Edge of the raster: horizontal `(0, i, j)` joins nodes `(i,j)`,
/// `(i+1,j)`; vertical `(1, i, j)` joins `(i,j)`, `(i,j+1)`.
type Edge = (u8, usize, usize);

/// Boundary of an open set as polylines, each flagged closed or open.
fn outline(set: &DefinableSet, frame: &Frame, n: usize) -> Vec<(Vec<[f64; 2]>, bool)> {
    let inside: Vec<Vec<bool>> =
        (0..=n).into_par_iter().map(|i| (0..=n).map(|j| set.contains_lenient(&frame.world(i, j, n))).collect()).collect();
    let crossing = |e: Edge| -> [f64; 2] {
        let (k, i, j) = e;
        let a = frame.world(i, j, n);
        let b = if k == 0 { frame.world(i + 1, j, n) } else { frame.world(i, j + 1, n) };
        let a_in = inside[i][j];
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..12 {
            let m = 0.5 * (lo + hi);
            let p = [a[0] + m * (b[0] - a[0]), a[1] + m * (b[1] - a[1])];
            if set.contains_lenient(&p) == a_in {
                lo = m;
            } else {
                hi = m;
            }
        }
        let m = 0.5 * (lo + hi);
        [a[0] + m * (b[0] - a[0]), a[1] + m * (b[1] - a[1])]
    };

    let mut adj: BTreeMap<Edge, Vec<Edge>> = BTreeMap::new();
    let mut link = |a: Edge, b: Edge| {
        adj.entry(a).or_default().push(b);
        adj.entry(b).or_default().push(a);
    };
    for i in 0..n {
        for j in 0..n {
            let (a, b, c, d) = (inside[i][j], inside[i + 1][j], inside[i + 1][j + 1], inside[i][j + 1]);
            let bottom = (0, i, j);
            let right = (1, i + 1, j);
            let top = (0, i, j + 1);
            let left = (1, i, j);
            let cut: Vec<Edge> = [(a != b, bottom), (b != c, right), (c != d, top), (d != a, left)]
                .into_iter()
                .filter_map(|(x, e)| x.then_some(e))
                .collect();
            match cut.len() {
                2 => link(cut[0], cut[1]),
                4 => {
                    let mid = [frame.world(i, j, n), frame.world(i + 1, j + 1, n)];
                    let centre = set.contains_lenient(&[0.5 * (mid[0][0] + mid[1][0]), 0.5 * (mid[0][1] + mid[1][1])]);
                    if centre == a {
                        link(bottom, right);
                        link(top, left);
                    } else {
                        link(bottom, left);
                        link(right, top);
                    }
                }
                _ => {}
            }
        }
    }

    let points: BTreeMap<Edge, [f64; 2]> = adj.keys().copied().collect::<Vec<_>>().into_par_iter().map(|e| (e, crossing(e))).collect();
    let mut seen: BTreeMap<Edge, bool> = adj.keys().map(|e| (*e, false)).collect();
    let mut out = Vec::new();
    // open chains first, from their ends, then the closed loops
    let starts: Vec<Edge> = adj.iter().filter(|(_, v)| v.len() == 1).map(|(k, _)| *k).chain(adj.keys().copied()).collect();
    for start in starts {
        if seen[&start] {
            continue;
        }
        let mut chain = vec![start];
        seen.insert(start, true);
        let mut cur = start;
        loop {
            let next = adj[&cur].iter().find(|e| !seen[*e]).copied();
            match next {
                Some(e) => {
                    seen.insert(e, true);
                    chain.push(e);
                    cur = e;
                }
                None => break,
            }
        }
        let closed = chain.len() > 2 && adj[&cur].contains(&start);
        out.push((chain.iter().map(|e| points[e]).collect(), closed));
    }
    out
}

fn draw_set(canvas: &mut Canvas, frame: &Frame, set: &DefinableSet, color: &str, extra: &str) -> Result<()> {
    if is_open(set) {
        for (pts, closed) in outline(set, frame, RASTER) {
            canvas.polyline(frame, &pts, closed, color, extra);
        }
    } else {
        let mut cloud = boundary_sample(set, 200)?;
        cloud.canonicalize();
        for p in &cloud.points {
            canvas.dot(frame, [p[0], p[1]], 1.5, color);
        }
    }
    Ok(())
}

fn point2(v: &Value) -> Option<[f64; 2]> {
    let a = v.as_array()?;
    (a.len() == 2).then(|| Some([a[0].as_f64()?, a[1].as_f64()?])).flatten()
}

pub fn render(report: &Report) -> Result<String> {
    match &report.scenario {
        Scenario::Counterexample(_) => render_profile(report),
        Scenario::CoverBuild(_) | Scenario::CoverVerify(_) => render_cover(report),
        Scenario::Regularity(s) => {
            let set = s.set.build()?;
            if set.dim() != 2 {
                bail!("unsupported dimension {} (only planar geometry renders)", set.dim());
            }
            render_regularity(report, &set)
        }
        other => bail!("nothing to render for a {} report", other.kind()),
    }
}

fn title(report: &Report) -> String {
    let status = if report.pass { "pass" } else { "fail" };
    match &report.name {
        Some(n) => format!("{n} ({}, {status})", report.kind),
        None => format!("{} ({status})", report.kind),
    }
}

fn render_cover(report: &Report) -> Result<String> {
    let cover = cover_of(&report.scenario)?.ok_or_else(|| anyhow!("not a cover scenario"))?;
    if cover.ambient.dim() != 2 {
        bail!("unsupported dimension {} (only planar geometry renders)", cover.ambient.dim());
    }
    let bbox = cover.ambient.bbox().ok_or_else(|| anyhow!("ambient set is unbounded"))?;
    let frame = Frame::around(bbox, 0.08);
    let mut canvas = Canvas::new();
    draw_set(&mut canvas, &frame, &cover.ambient, "#000000", "")?;
    canvas.legend.push(("U".into(), "#000000".into()));
    for (k, piece) in cover.pieces.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        draw_set(&mut canvas, &frame, &piece.set, color, r#" stroke-dasharray="6,3""#)?;
        canvas.legend.push((piece.label.clone(), color.into()));
    }
    let verification = &report.result["verification"];
    if let Some(pts) = verification["uncovered"].as_array() {
        for p in pts.iter().filter_map(point2) {
            canvas.dot(&frame, p, 2.5, "#ff00ff");
        }
    }
    if let Some(w) = point2(&verification["witness"]["point"]) {
        canvas.cross(&frame, w, "#d62728");
        canvas.legend.push(("worst ratio".into(), "#d62728".into()));
    }
    Ok(canvas.finish(&title(report)))
}

fn render_regularity(report: &Report, set: &DefinableSet) -> Result<String> {
    let Scenario::Regularity(s) = &report.scenario else { unreachable!() };
    let mut b = set.bbox().cloned().unwrap_or(Aabb { lo: vec![-1.0, -1.0], hi: vec![1.0, 1.0] });
    for c in &s.checks {
        b = b.union(&Aabb { lo: c.x.clone(), hi: c.x.clone() });
    }
    let frame = Frame::around(&b, 0.15);
    let mut canvas = Canvas::new();
    draw_set(&mut canvas, &frame, set, "#000000", "")?;
    canvas.legend.push(("X".into(), "#000000".into()));
    let reach = frame.side * 2.0;
    for (k, c) in s.checks.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let x = [c.x[0], c.x[1]];
        for dv in [-c.epsilon, c.epsilon] {
            let vp = c.v[0] + dv;
            let dir = match s.axis {
                Some(0) => [1.0, vp],
                _ => [vp, 1.0],
            };
            let a = [x[0] - reach * dir[0], x[1] - reach * dir[1]];
            let z = [x[0] + reach * dir[0], x[1] + reach * dir[1]];
            canvas.polyline(&frame, &[a, z], false, color, r#" stroke-dasharray="4,4" stroke-opacity="0.7""#);
        }
        canvas.dot(&frame, x, 4.0, color);
        let label = report.result["checks"][k]["label"].as_str().unwrap_or("?");
        canvas.legend.push((format!("x = ({}, {}): {label}", x[0], x[1]), color.into()));
    }
    // clip cone edges to the plotting area
    let body = std::mem::take(&mut canvas.body);
    canvas.body = format!(
        "<clipPath id=\"plot\"><rect x=\"{m}\" y=\"{m}\" width=\"{w}\" height=\"{w}\"/></clipPath>\n<g clip-path=\"url(#plot)\">\n{body}</g>\n",
        m = MARGIN,
        w = CANVAS - 2.0 * MARGIN
    );
    Ok(canvas.finish(&title(report)))
}

fn render_profile(report: &Report) -> Result<String> {
    let rows = report.result["profile"]["rows"].as_array().ok_or_else(|| anyhow!("report has no profile rows"))?;
    let pts: Vec<[f64; 2]> = rows.iter().filter_map(|r| Some([r["s"].as_f64()?.ln().abs(), r["ratio"].as_f64()?])).collect();
    if pts.is_empty() {
        bail!("report has no profile rows");
    }
    let hi = pts.iter().fold(0.0f64, |m, p| m.max(p[0]).max(p[1]));
    let b = Aabb { lo: vec![0.0, 0.0], hi: vec![hi, hi] };
    let frame = Frame::around(&b, 0.02);
    let mut canvas = Canvas::new();
    let axis = [[0.0, 0.0], [hi, 0.0]];
    canvas.polyline(&frame, &axis, false, "#888888", "");
    canvas.polyline(&frame, &[[0.0, 0.0], [0.0, hi]], false, "#888888", "");
    canvas.polyline(&frame, &[[0.0, 0.0], [hi, hi]], false, "#888888", r#" stroke-dasharray="5,5""#);
    canvas.legend.push(("y = |ln s|".into(), "#888888".into()));
    canvas.polyline(&frame, &pts, false, PALETTE[0], "");
    for p in &pts {
        canvas.dot(&frame, *p, 2.5, PALETTE[0]);
    }
    canvas.legend.push(("ratio vs |ln s|".into(), PALETTE[0].into()));
    for (k, label) in [(0usize, "0".to_string()), (1, format!("{hi:.1}"))] {
        let (x, y) = frame.px([hi * k as f64, 0.0]);
        let _ = writeln!(canvas.body, r#"<text x="{x:.2}" y="{:.2}" font-family="sans-serif" font-size="11">{label}</text>"#, y + 14.0);
    }
    Ok(canvas.finish(&title(report)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame() -> Frame {
        Frame::around(&Aabb { lo: vec![-1.0, -1.0], hi: vec![1.0, 1.0] }, 0.1)
    }

    #[test]
    fn box_outline_is_one_loop() {
        let sq = DefinableSet::from_atoms(2, &["x > -0.5", "x < 0.5", "y > -0.5", "y < 0.5"], None).unwrap();
        let loops = outline(&sq, &frame(), 40);
        assert_eq!(loops.len(), 1);
        assert!(loops[0].1);
        // crossings are bisected onto the boundary
        for p in &loops[0].0 {
            let d = (p[0].abs() - 0.5).abs().min((p[1].abs() - 0.5).abs());
            assert!(d < 1e-3, "{p:?}");
        }
    }

    #[test]
    fn annulus_outline_is_two_loops() {
        let a = DefinableSet::from_atoms(2, &["x^2 + y^2 > 0.25", "x^2 + y^2 < 1"], None).unwrap();
        let loops = outline(&a, &frame(), 60);
        assert_eq!(loops.len(), 2);
        for (pts, closed) in &loops {
            assert!(*closed);
            let r: f64 = pts[0].iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(pts.iter().all(|p| ((p[0] * p[0] + p[1] * p[1]).sqrt() - r).abs() < 1e-3));
        }
    }

    #[test]
    fn frame_maps_into_the_canvas() {
        let f = frame();
        let (x0, y0) = f.px([-1.0, -1.0]);
        let (x1, y1) = f.px([1.0, 1.0]);
        assert!(x0 > MARGIN && x1 < CANVAS - MARGIN);
        assert!(y0 > y1);
    }
}
