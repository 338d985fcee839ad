//! Deterministic SVG 1.1 figures of traced curves.

use std::fmt::Write;

use crate::map_models::{MapModel, Rect, C64};
use crate::ray_tracer::TailCurve;

const PALETTE: [&str; 10] =
    ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#7f7f7f"];

#[derive(Clone, Debug, PartialEq)]
pub struct SvgOptions {
    pub view: Rect,
    /// Width in pixels; the height follows the aspect ratio of `view`.
    pub width: u32,
    /// Draw {z : Im fʲ(z) = 0} for j = 1..=depth in grey; 0 disables the layer.
    pub preimage_depth: usize,
    /// Cells per side of the grid used for the grey layer.
    pub preimage_grid: usize,
    pub critical_points: bool,
}

impl Default for SvgOptions {
    fn default() -> Self {
        SvgOptions {
            view: Rect::new(-4.0, 4.0, -4.0, 4.0),
            width: 800,
            preimage_depth: 2,
            preimage_grid: 400,
            critical_points: true,
        }
    }
}

struct Frame {
    view: Rect,
    w: f64,
    h: f64,
}

impl Frame {
    fn x(&self, re: f64) -> f64 {
        clamp((re - self.view.re_min) / (self.view.re_max - self.view.re_min) * self.w)
    }

    fn y(&self, im: f64) -> f64 {
        clamp((self.view.im_max - im) / (self.view.im_max - self.view.im_min) * self.h)
    }

    fn pt(&self, z: C64) -> String {
        format!("{:.2},{:.2}", self.x(z.re), self.y(z.im))
    }
}

fn clamp(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(-1e5, 1e5)
    }
}

/// FNV-1a, so a signed address keeps its colour across figures.
fn colour(key: &str) -> &'static str {
    let h = key.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ u64::from(b)).wrapping_mul(0x100_0000_01b3));
    PALETTE[(h % PALETTE.len() as u64) as usize]
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 8.0;
    let mag = 10f64.powf(raw.log10().floor());
    [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Zero set of Im fʲ on a grid, as line segments from marching squares.
pub fn preimage_segments(model: &MapModel, view: &Rect, j: usize, cells: usize) -> Vec<(C64, C64)> {
    let n = cells.max(2);
    let at = |a: usize, b: usize| {
        C64::new(
            view.re_min + (view.re_max - view.re_min) * a as f64 / n as f64,
            view.im_min + (view.im_max - view.im_min) * b as f64 / n as f64,
        )
    };
    let values: Vec<f64> = (0..=n)
        .flat_map(|b| (0..=n).map(move |a| (a, b)))
        .map(|(a, b)| {
            let mut w = at(a, b);
            for _ in 0..j {
                w = model.evaluate(w);
            }
            if w.is_finite() {
                w.im / (1.0 + w.norm())
            } else {
                f64::NAN
            }
        })
        .collect();
    let v = |a: usize, b: usize| values[b * (n + 1) + a];
    let mut out = Vec::new();
    for b in 0..n {
        for a in 0..n {
            let corners = [(a, b), (a + 1, b), (a + 1, b + 1), (a, b + 1)];
            let vals = corners.map(|(p, q)| v(p, q));
            if vals.iter().any(|x| !x.is_finite()) {
                continue;
            }
            let mut cross = Vec::with_capacity(4);
            for e in 0..4 {
                let (p, q) = (e, (e + 1) % 4);
                if (vals[p] >= 0.0) != (vals[q] >= 0.0) {
                    let s = vals[p] / (vals[p] - vals[q]);
                    let (zp, zq) = (at(corners[p].0, corners[p].1), at(corners[q].0, corners[q].1));
                    cross.push(zp + (zq - zp) * s);
                }
            }
            match cross.len() {
                2 => out.push((cross[0], cross[1])),
                4 => {
                    out.push((cross[0], cross[1]));
                    out.push((cross[2], cross[3]));
                }
                _ => {}
            }
        }
    }
    out
}

pub fn render_svg(model: &MapModel, curves: &[TailCurve], opts: &SvgOptions) -> String {
    let view = opts.view;
    let w = f64::from(opts.width.max(1));
    let h = (w * (view.im_max - view.im_min) / (view.re_max - view.re_min)).round().max(1.0);
    let fr = Frame { view, w, h };
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(s, r#"<defs><clipPath id="plot"><rect x="0" y="0" width="{w}" height="{h}"/></clipPath></defs>"#);
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#);

    if opts.preimage_depth > 0 {
        let _ = writeln!(s, r##"<g id="preimages" stroke="#b4b4b4" stroke-width="0.8" fill="none" clip-path="url(#plot)">"##);
        for j in 1..=opts.preimage_depth {
            let segs = preimage_segments(model, &view, j, opts.preimage_grid);
            let mut d = String::new();
            for (a, b) in segs {
                let _ = write!(d, "M{}L{}", fr.pt(a), fr.pt(b));
            }
            if !d.is_empty() {
                let _ = writeln!(s, r#"<path d="{d}"/>"#);
            }
        }
        let _ = writeln!(s, "</g>");
    }

    let _ = writeln!(s, r##"<g id="axes" stroke="#000000" stroke-width="1" font-family="sans-serif" font-size="11">"##);
    let (x0, y0) = (fr.x(0.0).clamp(0.0, w), fr.y(0.0).clamp(0.0, h));
    let _ = writeln!(s, r#"<line x1="0" y1="{y0:.2}" x2="{w}" y2="{y0:.2}"/>"#);
    let _ = writeln!(s, r#"<line x1="{x0:.2}" y1="0" x2="{x0:.2}" y2="{h}"/>"#);
    let step = nice_step(view.re_max - view.re_min);
    let mut k = (view.re_min / step).ceil() as i64;
    while (k as f64) * step <= view.re_max {
        let v = k as f64 * step;
        if k != 0 {
            let x = fr.x(v);
            let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}"/>"#, y0 - 4.0, y0 + 4.0);
            let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" stroke="none" text-anchor="middle">{}</text>"#, y0 + 15.0, label(v));
        }
        k += 1;
    }
    let step = nice_step(view.im_max - view.im_min);
    let mut k = (view.im_min / step).ceil() as i64;
    while (k as f64) * step <= view.im_max {
        let v = k as f64 * step;
        if k != 0 {
            let y = fr.y(v);
            let _ = writeln!(s, r#"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}"/>"#, x0 - 4.0, x0 + 4.0);
            let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" stroke="none">{}i</text>"#, x0 + 6.0, y + 4.0, label(v));
        }
        k += 1;
    }
    let _ = writeln!(s, "</g>");

    let _ = writeln!(s, r#"<g id="curves" fill="none" stroke-width="1.6" clip-path="url(#plot)">"#);
    for c in curves {
        let key = format!("{} {}", c.signed.addr, c.signed.sign);
        let pts: Vec<String> = c.points.iter().filter(|p| p.z.is_finite()).map(|p| fr.pt(p.z)).collect();
        if pts.is_empty() {
            continue;
        }
        let _ = writeln!(
            s,
            r#"<polyline stroke="{}" points="{}"><title>{} level {}</title></polyline>"#,
            colour(&key),
            pts.join(" "),
            escape(&key),
            c.level
        );
    }
    let _ = writeln!(s, "</g>");

    if opts.critical_points {
        let _ = writeln!(s, r##"<g id="critical" fill="#000000" clip-path="url(#plot)">"##);
        let crit = model.critical_points_in(&view);
        for c in &crit {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3.5"/>"#, fr.x(c.re), fr.y(c.im));
        }
        let mut marks: Vec<C64> = curves.iter().flat_map(|c| c.markers.iter().map(|m| m.point)).collect();
        marks.retain(|z| view.contains(*z) && crit.iter().all(|c| (c - z).norm() > 1e-6));
        marks.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        marks.dedup_by(|a, b| (*a - *b).norm() < 1e-9);
        for z in marks {
            let _ = writeln!(
                s,
                r##"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="white" stroke="#000000" stroke-width="1"/>"##,
                fr.x(z.re),
                fr.y(z.im)
            );
        }
        let _ = writeln!(s, "</g>");
    }
    s.push_str("</svg>\n");
    s
}

fn label(v: f64) -> String {
    let t = format!("{v:.6}");
    let t = t.trim_end_matches('0').trim_end_matches('.');
    if t == "-0" {
        "0".into()
    } else {
        t.into()
    }
}
