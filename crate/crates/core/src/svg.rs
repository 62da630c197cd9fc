//! Deterministic SVG figures: per-cell cone panels, invariant regions in log
//! coordinates, and phase-plane trajectories.
//!
//! Coordinates are printed with a fixed number of decimals so identical inputs
//! give byte-identical files.

use std::fmt::Write;

use crate::certify::Certificate;
use crate::cone::Cone2;
use crate::fan::{Cell, Fan2};
use crate::inclusion::ConeDI;
use crate::region::{family_vertices, InvariantPolygon};
use crate::simulate::Trajectory;
use crate::vec2::RatVec2;

const K_COLOR: &str = "#e08a1e";
const B_COLOR: &str = "#c62828";
const FAN_COLOR: &str = "#1e5aa8";
const REGION_COLOR: &str = "#2e7d32";

fn num(x: f64) -> String {
    let s = format!("{x:.3}");
    if s == "-0.000" {
        "0.000".into()
    } else {
        s
    }
}

struct Canvas {
    body: String,
    width: f64,
    height: f64,
}

impl Canvas {
    fn new(width: f64, height: f64) -> Canvas {
        Canvas { body: String::new(), width, height }
    }

    fn raw(&mut self, s: &str) {
        self.body.push_str(s);
        self.body.push('\n');
    }

    fn path(&mut self, pts: &[[f64; 2]], closed: bool, style: &str) {
        if pts.is_empty() {
            return;
        }
        let mut d = String::new();
        for (i, p) in pts.iter().enumerate() {
            let _ = write!(d, "{}{} {} ", if i == 0 { "M" } else { "L" }, num(p[0]), num(p[1]));
        }
        if closed {
            d.push('Z');
        }
        self.raw(&format!("<path d=\"{}\" {style}/>", d.trim_end()));
    }

    fn text(&mut self, x: f64, y: f64, size: f64, s: &str) {
        let esc = s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;");
        self.raw(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"{}\">{esc}</text>",
            num(x),
            num(y),
            num(size)
        ));
    }

    fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n{}</svg>\n",
            self.body,
            w = num(self.width),
            h = num(self.height)
        )
    }
}

/// Boundary points of a cone glyph of radius `r` at `c`, in screen coordinates (y down).
fn cone_outline(cone: &Cone2, c: [f64; 2], r: f64) -> Vec<[f64; 2]> {
    let at = |ang: f64| [c[0] + r * ang.cos(), c[1] - r * ang.sin()];
    let angle = |v: &RatVec2| {
        let f = v.to_f64();
        f[1].atan2(f[0])
    };
    let arc = |a0: f64, a1: f64| -> Vec<[f64; 2]> {
        let mut span = a1 - a0;
        while span < 0.0 {
            span += std::f64::consts::TAU;
        }
        let n = ((span / 0.1).ceil() as usize).max(1);
        let mut pts = vec![c];
        pts.extend((0..=n).map(|i| at(a0 + span * i as f64 / n as f64)));
        pts
    };
    match cone {
        Cone2::Wedge(a, b) => arc(angle(a), angle(b)),
        Cone2::HalfPlane(d) => arc(angle(d), angle(d) + std::f64::consts::PI),
        Cone2::Full => (0..64).map(|i| at(std::f64::consts::TAU * i as f64 / 64.0)).collect(),
        _ => Vec::new(),
    }
}

fn draw_cone(cv: &mut Canvas, cone: &Cone2, c: [f64; 2], r: f64, color: &str) {
    let style = format!("fill=\"{color}\" fill-opacity=\"0.35\" stroke=\"{color}\" stroke-width=\"1\"");
    match cone {
        Cone2::Zero => cv.raw(&format!("<circle cx=\"{}\" cy=\"{}\" r=\"2\" fill=\"{color}\"/>", num(c[0]), num(c[1]))),
        Cone2::Ray(d) => draw_arrow(cv, c, d, r, color),
        Cone2::Line(d) => {
            draw_arrow(cv, c, d, r, color);
            draw_arrow(cv, c, &-d, r, color);
        }
        _ => cv.path(&cone_outline(cone, c, r), true, &style),
    }
}

fn draw_arrow(cv: &mut Canvas, c: [f64; 2], d: &RatVec2, r: f64, color: &str) {
    let u = d.unit_f64();
    let tip = [c[0] + r * u[0], c[1] - r * u[1]];
    let back = [tip[0] - 0.25 * r * u[0], tip[1] + 0.25 * r * u[1]];
    let side = [0.1 * r * u[1], 0.1 * r * u[0]];
    cv.path(&[c, tip], false, &format!("stroke=\"{color}\" stroke-width=\"2\" fill=\"none\""));
    cv.path(
        &[tip, [back[0] + side[0], back[1] + side[1]], [back[0] - side[0], back[1] - side[1]]],
        true,
        &format!("fill=\"{color}\""),
    );
}

fn cell_label(fan: &Fan2, c: Cell) -> String {
    match c {
        Cell::Origin => "origin".into(),
        Cell::Ray(i) => format!("ray {}", fan.rays[i]),
        Cell::Sector(i) => {
            let (a, b) = fan.sector_rays(i);
            format!("sector {a}..{b}")
        }
    }
}

struct Panel<'a> {
    cell: Cell,
    escape: &'a crate::escape::EscapeCone,
    cone: Option<&'a Cone2>,
    pass: bool,
}

fn panels(fan: &Fan2, items: &[Panel]) -> String {
    let cols = 4usize;
    let (pw, ph) = (180.0, 200.0);
    let rows = items.len().div_ceil(cols) + 1;
    let mut cv = Canvas::new(pw * cols as f64, ph * rows as f64);
    fan_panel(&mut cv, fan, [0.0, 0.0], [pw * cols as f64, ph]);
    for (i, v) in items.iter().enumerate() {
        let (col, row) = (i % cols, i / cols + 1);
        let origin = [col as f64 * pw, row as f64 * ph];
        let c = [origin[0] + pw / 2.0, origin[1] + ph / 2.0 + 5.0];
        let frame = if v.pass { "#9e9e9e" } else { B_COLOR };
        cv.raw(&format!(
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"{frame}\"/>",
            num(origin[0] + 4.0),
            num(origin[1] + 4.0),
            num(pw - 8.0),
            num(ph - 8.0)
        ));
        draw_cone(&mut cv, &v.escape.limit, c, 55.0, B_COLOR);
        for t in &v.escape.thickened {
            draw_arrow(&mut cv, c, t, 70.0, B_COLOR);
        }
        if let Some(k) = v.cone {
            draw_cone(&mut cv, k, c, 40.0, K_COLOR);
            cv.text(origin[0] + 10.0, origin[1] + ph - 12.0, 11.0, if v.pass { "separated" } else { "overlap" });
        }
        cv.text(origin[0] + 10.0, origin[1] + 20.0, 11.0, &cell_label(fan, v.cell));
    }
    cv.finish()
}

/// One panel per non-origin cell with its cone `K` and limit escape cone `B`;
/// thickened escape rays are drawn as arrows, failing cells are framed in red.
pub fn certificate_svg(cert: &Certificate) -> String {
    let items: Vec<Panel> = cert
        .cells
        .iter()
        .map(|v| Panel { cell: v.cell, escape: &v.escape, cone: Some(&v.cone), pass: v.pass })
        .collect();
    panels(&cert.fan, &items)
}

/// Escape cones of every non-origin cell of a fan.
pub fn escape_svg(fan: &Fan2, cells: &[crate::report::EscapeEntry]) -> String {
    let items: Vec<Panel> =
        cells.iter().map(|e| Panel { cell: e.cell, escape: &e.escape, cone: None, pass: true }).collect();
    panels(fan, &items)
}

fn fan_panel(cv: &mut Canvas, fan: &Fan2, origin: [f64; 2], size: [f64; 2]) {
    let c = [origin[0] + size[0] / 2.0, origin[1] + size[1] / 2.0];
    let r = size[1] * 0.45;
    for ray in &fan.rays {
        draw_arrow(cv, c, ray, r, FAN_COLOR);
    }
    cv.text(origin[0] + 10.0, origin[1] + 20.0, 12.0, &format!("fan, varrho = {}", fan.varrho));
}

/// Maps log coordinates inside `[-span, span]^2` to a square canvas.
struct LogView {
    span: f64,
    size: f64,
}

impl LogView {
    fn map(&self, lx: [f64; 2]) -> [f64; 2] {
        let s = self.size / (2.0 * self.span);
        [(lx[0] + self.span) * s, (self.span - lx[1]) * s]
    }

    fn map_point(&self, x: [f64; 2]) -> [f64; 2] {
        self.map([x[0].ln(), x[1].ln()])
    }
}

/// Straight edges in the plane become curves in log coordinates; sample them.
fn polygon_log_path(view: &LogView, vs: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let n = vs.len();
    let mut pts = Vec::new();
    for i in 0..n {
        let (p, q) = (vs[i], vs[(i + 1) % n]);
        for k in 0..32 {
            let s = k as f64 / 32.0;
            let x = [p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])];
            if x[0] > 0.0 && x[1] > 0.0 {
                pts.push(view.map_point(x));
            }
        }
    }
    pts
}

fn fan_lines(cv: &mut Canvas, view: &LogView, fan: &Fan2) {
    let w = fan.width();
    for ray in &fan.rays {
        let u = ray.unit_f64();
        let far = [u[0] * view.span * 1.5, u[1] * view.span * 1.5];
        let a = view.map([0.0, 0.0]);
        let b = view.map(far);
        cv.path(&[a, b], false, &format!("stroke=\"{FAN_COLOR}\" stroke-width=\"1\" fill=\"none\""));
        let n = [-u[1] * w, u[0] * w];
        let strip = [
            view.map(n),
            view.map([far[0] + n[0], far[1] + n[1]]),
            view.map([far[0] - n[0], far[1] - n[1]]),
            view.map([-n[0], -n[1]]),
        ];
        cv.path(&strip, true, &format!("fill=\"{FAN_COLOR}\" fill-opacity=\"0.08\" stroke=\"none\""));
    }
}

fn region_extent(vs: &[[f64; 2]]) -> f64 {
    vs.iter().map(|v| v[0].ln().abs().max(v[1].ln().abs())).fold(1.0, f64::max)
}

/// The polygon in log coordinates with fan rays, fattened strips, dashed scaffold
/// curves and optional nested family members at the given parameters.
pub fn region_svg(di: &ConeDI, poly: &InvariantPolygon, family: &[f64]) -> String {
    let mut members: Vec<Vec<[f64; 2]>> = Vec::new();
    if let Some(plan) = &poly.plan {
        for &t in family {
            if let Ok(vs) = family_vertices(plan, t) {
                members.push(vs);
            }
        }
    }
    let base = poly.vertices_f64();
    let extent = members.iter().chain([&base]).map(|v| region_extent(v)).fold(1.0, f64::max);
    let view = LogView { span: extent * 1.15, size: 640.0 };
    let mut cv = Canvas::new(view.size, view.size);
    fan_lines(&mut cv, &view, &di.fan);
    if let Some(plan) = &poly.plan {
        for c in &plan.curves {
            let (u0, u1) = (crate::rational::to_f64(&c.t0).ln(), (poly.t_hat * 4.0).ln() + 1.0);
            let pts: Vec<[f64; 2]> = (0..=64).map(|i| view.map(c.log_point(u0 + (u1 - u0) * i as f64 / 64.0))).collect();
            cv.path(&pts, false, "stroke=\"#616161\" stroke-width=\"1\" stroke-dasharray=\"4 3\" fill=\"none\"");
        }
    }
    for vs in &members {
        cv.path(&polygon_log_path(&view, vs), true, &format!("stroke=\"{REGION_COLOR}\" stroke-width=\"1\" fill=\"none\""));
    }
    cv.path(
        &polygon_log_path(&view, &base),
        true,
        &format!("stroke=\"{REGION_COLOR}\" stroke-width=\"2\" fill=\"{REGION_COLOR}\" fill-opacity=\"0.12\""),
    );
    for v in &base {
        let p = view.map_point(*v);
        cv.raw(&format!("<circle cx=\"{}\" cy=\"{}\" r=\"2.5\" fill=\"{REGION_COLOR}\"/>", num(p[0]), num(p[1])));
    }
    cv.text(10.0, 20.0, 12.0, &format!("log coordinates, t = {}", poly.t_hat));
    cv.finish()
}

/// Trajectories in log coordinates, with the region outline when given.
pub fn phase_svg(trajectories: &[Trajectory], region: Option<&InvariantPolygon>) -> String {
    let mut extent: f64 = 1.0;
    for t in trajectories {
        extent = extent.max(region_extent(&t.states));
    }
    if let Some(p) = region {
        extent = extent.max(region_extent(&p.vertices_f64()));
    }
    let view = LogView { span: extent * 1.1, size: 640.0 };
    let mut cv = Canvas::new(view.size, view.size);
    let axes = [view.map([-view.span, 0.0]), view.map([view.span, 0.0])];
    cv.path(&axes, false, "stroke=\"#bdbdbd\" fill=\"none\"");
    let axes = [view.map([0.0, -view.span]), view.map([0.0, view.span])];
    cv.path(&axes, false, "stroke=\"#bdbdbd\" fill=\"none\"");
    if let Some(p) = region {
        cv.path(
            &polygon_log_path(&view, &p.vertices_f64()),
            true,
            &format!("stroke=\"{REGION_COLOR}\" stroke-width=\"2\" fill=\"none\""),
        );
    }
    for t in trajectories {
        let pts: Vec<[f64; 2]> = t.states.iter().map(|x| view.map_point(*x)).collect();
        cv.path(&pts, false, "stroke=\"#37474f\" stroke-width=\"0.8\" fill=\"none\" stroke-opacity=\"0.7\"");
        if let Some(x) = t.states.first() {
            let p = view.map_point(*x);
            cv.raw(&format!("<circle cx=\"{}\" cy=\"{}\" r=\"2\" fill=\"#37474f\"/>", num(p[0]), num(p[1])));
        }
    }
    cv.text(10.0, 20.0, 12.0, &format!("{} trajectories, log coordinates", trajectories.len()));
    cv.finish()
}
