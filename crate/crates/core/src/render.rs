//! Plain SVG 1.1 and CSV output: lines, filled polygons and text only.

use std::fmt::Write as _;

use crate::gamma_region::{transform_matrix, GammaRegion};
use crate::geometry::{BBox, Line, Point};
use crate::region_builder::SliceRecord;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, p: Point) -> (f64, f64) {
        let u = MARGIN + (p[0] - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - 2.0 * MARGIN);
        let v = HEIGHT - MARGIN - (p[1] - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - 2.0 * MARGIN);
        (u, v)
    }
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">
<style>
.stable {{ fill: #9ecae1; fill-opacity: 0.8; stroke: #08519c; stroke-width: 1 }}
.boundary {{ stroke: #636363; stroke-width: 0.8 }}
.curve {{ fill: none; stroke: #08519c; stroke-width: 1.2 }}
.axis {{ stroke: #000; stroke-width: 1 }}
text {{ font-family: sans-serif; font-size: 12px }}
</style>
<text x="{}" y="20" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

fn axes(out: &mut String, f: &Frame, xlabel: &str, ylabel: &str) {
    let (x0, y0) = (MARGIN, HEIGHT - MARGIN);
    let (x1, y1) = (WIDTH - MARGIN, MARGIN);
    let _ = writeln!(
        out,
        r#"<rect class="axis" x="{x0}" y="{y1}" width="{}" height="{}" fill="none"/>"#,
        x1 - x0,
        y0 - y1
    );
    let _ = writeln!(out, r#"<text x="{x0}" y="{}" text-anchor="middle">{}</text>"#, y0 + 16.0, num(f.x.0));
    let _ = writeln!(out, r#"<text x="{x1}" y="{}" text-anchor="middle">{}</text>"#, y0 + 16.0, num(f.x.1));
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, x0 - 4.0, y0, num(f.y.0));
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, x0 - 4.0, y1 + 10.0, num(f.y.1));
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        y0 + 32.0,
        escape(xlabel)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(ylabel)
    );
}

fn num(x: f64) -> String {
    format!("{:.4}", x)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Segment of `line` inside `bbox`, if any.
pub fn clip_line(line: &Line, bbox: &BBox) -> Option<(Point, Point)> {
    let p = line.foot();
    let d = line.direction();
    let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
    for (pi, di, lo, hi) in [(p[0], d[0], bbox.x_min, bbox.x_max), (p[1], d[1], bbox.y_min, bbox.y_max)] {
        if di == 0.0 {
            if pi < lo || pi > hi {
                return None;
            }
            continue;
        }
        let (a, b) = ((lo - pi) / di, (hi - pi) / di);
        t0 = t0.max(a.min(b));
        t1 = t1.min(a.max(b));
    }
    (t1 > t0).then(|| ([p[0] + t0 * d[0], p[1] + t0 * d[1]], [p[0] + t1 * d[0], p[1] + t1 * d[1]]))
}

/// One slice: boundary lines, shaded stable polygons, axes in r-space and,
/// for circle regions, the controller coefficients at the box corners.
pub fn slice_svg(rec: &SliceRecord, region: &GammaRegion) -> String {
    let b = rec.bbox;
    let f = Frame {
        x: (b.x_min, b.x_max),
        y: (b.y_min, b.y_max),
    };
    let (xl, yl, zl) = if region.is_hurwitz() {
        ("r1 = kI", "r2 = kD", "kP")
    } else {
        ("r1", "r2", "r3")
    };
    let mut out = String::new();
    header(&mut out, &format!("{zl} = {}", rec.r3));
    for p in &rec.polygons {
        let pts: Vec<String> = p
            .vertices
            .iter()
            .map(|&v| {
                let (u, w) = f.px(v);
                format!("{u:.3},{w:.3}")
            })
            .collect();
        let _ = writeln!(out, r#"<polygon class="stable" points="{}"/>"#, pts.join(" "));
    }
    for l in &rec.lines {
        if let Some((p, q)) = clip_line(&Line::new(l.h1, l.h2, l.h0), &b) {
            let ((x1, y1), (x2, y2)) = (f.px(p), f.px(q));
            let _ = writeln!(
                out,
                r#"<line class="boundary" x1="{x1:.3}" y1="{y1:.3}" x2="{x2:.3}" y2="{y2:.3}"/>"#
            );
        }
    }
    axes(&mut out, &f, xl, yl);
    if let Ok(t) = transform_matrix(region) {
        let c = |x: f64, y: f64| {
            let r = [x, y, rec.r3];
            let v: Vec<String> = t
                .iter()
                .map(|row| num(row[0] * r[0] + row[1] * r[1] + row[2] * r[2]))
                .collect();
            v.join(", ")
        };
        let _ = writeln!(
            out,
            r#"<text x="{MARGIN}" y="{}">c at lower left: ({})</text>"#,
            HEIGHT - 8.0,
            c(b.x_min, b.y_min)
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="end">c at upper right: ({})</text>"#,
            WIDTH - MARGIN,
            MARGIN - 8.0,
            c(b.x_max, b.y_max)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// kP-plot branches; the vertical range skips the tails near poles.
pub fn kp_plot_svg(branches: &[Vec<(f64, f64)>], xlabel: &str, ylabel: &str) -> String {
    let mut ys: Vec<f64> = branches.iter().flatten().map(|p| p.1).filter(|y| y.is_finite()).collect();
    ys.sort_by(f64::total_cmp);
    let xs = branches.iter().flatten().map(|p| p.0).filter(|x| x.is_finite());
    let (xmin, xmax) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    let (mut ylo, mut yhi) = if ys.is_empty() {
        (-1.0, 1.0)
    } else {
        (ys[ys.len() / 50], ys[ys.len() - 1 - ys.len() / 50])
    };
    let pad = 0.1 * (yhi - ylo).max(1e-9);
    ylo -= pad;
    yhi += pad;
    let f = Frame {
        x: if xmax > xmin { (xmin, xmax) } else { (0.0, 1.0) },
        y: (ylo, yhi),
    };
    let mut out = String::new();
    header(&mut out, &format!("{ylabel}-plot"));
    for br in branches {
        let mut run: Vec<String> = Vec::new();
        let flush = |run: &mut Vec<String>, out: &mut String| {
            if run.len() > 1 {
                let _ = writeln!(out, r#"<polyline class="curve" points="{}"/>"#, run.join(" "));
            }
            run.clear();
        };
        for &(x, y) in br {
            if y.is_finite() && y >= ylo && y <= yhi {
                let (u, v) = f.px([x, y]);
                run.push(format!("{u:.3},{v:.3}"));
            } else {
                flush(&mut run, &mut out);
            }
        }
        flush(&mut run, &mut out);
    }
    axes(&mut out, &f, xlabel, ylabel);
    out.push_str("</svg>\n");
    out
}

pub fn kp_plot_csv(samples: &[(f64, f64)]) -> String {
    let mut out = String::from("param,r3\n");
    for (p, r) in samples {
        let _ = writeln!(out, "{p},{r}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clip_diagonal() {
        let (p, q) = clip_line(&Line::new(1.0, -1.0, 0.0), &BBox::square(1.0)).unwrap();
        assert!((p[0] - p[1]).abs() < 1e-12 && (q[0] - q[1]).abs() < 1e-12);
        assert!(((p[0] - q[0]).abs() - 2.0).abs() < 1e-12);
        assert!(clip_line(&Line::new(1.0, 0.0, -5.0), &BBox::square(1.0)).is_none());
    }

    #[test]
    fn csv_header() {
        assert_eq!(kp_plot_csv(&[(0.5, -2.0)]), "param,r3\n0.5,-2\n");
    }
}
