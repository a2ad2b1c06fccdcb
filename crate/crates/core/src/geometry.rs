//! Planar line arrangements restricted to a box, and convex polygon clipping.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub type Point = [f64; 2];

/// The line `h1·x + h2·y + h0 = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub h1: f64,
    pub h2: f64,
    pub h0: f64,
}

impl Line {
    pub fn new(h1: f64, h2: f64, h0: f64) -> Self {
        Line { h1, h2, h0 }
    }

    pub fn value(&self, p: Point) -> f64 {
        self.h1 * p[0] + self.h2 * p[1] + self.h0
    }

    pub fn normal_norm(&self) -> f64 {
        self.h1.hypot(self.h2)
    }

    /// Signed Euclidean distance (positive on the side the normal points to).
    pub fn distance(&self, p: Point) -> f64 {
        self.value(p) / self.normal_norm()
    }

    /// Unit normal, with the sign fixed so the first nonzero component of
    /// the normal is positive. Returns the line and whether it was flipped.
    pub fn canonical(&self) -> (Line, bool) {
        let n = self.normal_norm();
        let flip = self.h1 < 0.0 || (self.h1 == 0.0 && self.h2 < 0.0);
        let s = if flip { -1.0 / n } else { 1.0 / n };
        (Line::new(self.h1 * s, self.h2 * s, self.h0 * s), flip)
    }

    pub fn intersection(&self, other: &Line) -> Option<Point> {
        let det = self.h1 * other.h2 - self.h2 * other.h1;
        let scale = self.normal_norm() * other.normal_norm();
        if det.abs() <= 1e-14 * scale {
            return None;
        }
        let x = (self.h2 * other.h0 - other.h2 * self.h0) / det;
        let y = (other.h1 * self.h0 - self.h1 * other.h0) / det;
        Some([x, y])
    }

    /// Point of the line closest to the origin.
    pub fn foot(&self) -> Point {
        let n2 = self.h1 * self.h1 + self.h2 * self.h2;
        [-self.h0 * self.h1 / n2, -self.h0 * self.h2 / n2]
    }

    /// Unit direction vector along the line.
    pub fn direction(&self) -> Point {
        let n = self.normal_norm();
        [-self.h2 / n, self.h1 / n]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl BBox {
    pub fn square(half: f64) -> Self {
        BBox {
            x_min: -half,
            x_max: half,
            y_min: -half,
            y_max: half,
        }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn size(&self) -> f64 {
        self.width().max(self.height())
    }

    pub fn contains_strictly(&self, p: Point) -> bool {
        p[0] > self.x_min && p[0] < self.x_max && p[1] > self.y_min && p[1] < self.y_max
    }

    pub fn polygon(&self) -> Polygon {
        Polygon::new(vec![
            [self.x_min, self.y_min],
            [self.x_max, self.y_min],
            [self.x_max, self.y_max],
            [self.x_min, self.y_max],
        ])
    }

    fn on_edge(&self, p: Point, tol: f64) -> bool {
        (p[0] - self.x_min).abs() <= tol
            || (p[0] - self.x_max).abs() <= tol
            || (p[1] - self.y_min).abs() <= tol
            || (p[1] - self.y_max).abs() <= tol
    }
}

/// Default box: `[-10·s, 10·s]²` with `s = max(1, |h0/h1|, |h0/h2|)`, doubled
/// until every pairwise intersection is interior, capped at `1e6·s`.
pub fn auto_box(lines: &[Line]) -> BBox {
    let mut s = 1.0_f64;
    for l in lines {
        let n = l.normal_norm();
        for h in [l.h1, l.h2] {
            if h.abs() > 1e-12 * n {
                s = s.max((l.h0 / h).abs());
            }
        }
    }
    let cap = 1e6 * s;
    let mut half = 10.0 * s;
    let mut far = 0.0_f64;
    for (i, a) in lines.iter().enumerate() {
        for b in &lines[i + 1..] {
            if let Some(p) = a.intersection(b) {
                far = far.max(p[0].abs()).max(p[1].abs());
            }
        }
    }
    while far >= 0.99 * half && 2.0 * half <= cap {
        half *= 2.0;
    }
    BBox::square(half)
}

/// Convex polygon, counter-clockwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub vertices: Vec<Point>,
}

impl Polygon {
    pub fn new(vertices: Vec<Point>) -> Self {
        let mut p = Polygon { vertices };
        if p.signed_area() < 0.0 {
            p.vertices.reverse();
        }
        p
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.len() < 3
    }

    pub fn signed_area(&self) -> f64 {
        let n = self.vertices.len();
        if n < 3 {
            return 0.0;
        }
        let mut a = 0.0;
        for i in 0..n {
            let p = self.vertices[i];
            let q = self.vertices[(i + 1) % n];
            a += p[0] * q[1] - q[0] * p[1];
        }
        0.5 * a
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    pub fn centroid(&self) -> Point {
        let n = self.vertices.len();
        let a = self.signed_area();
        if n < 3 || a.abs() < 1e-300 {
            let m = n.max(1) as f64;
            let sx: f64 = self.vertices.iter().map(|p| p[0]).sum();
            let sy: f64 = self.vertices.iter().map(|p| p[1]).sum();
            return [sx / m, sy / m];
        }
        // Shift to the first vertex for accuracy on far-away faces.
        let o = self.vertices[0];
        let (mut cx, mut cy) = (0.0, 0.0);
        for i in 0..n {
            let p = [self.vertices[i][0] - o[0], self.vertices[i][1] - o[1]];
            let q = [
                self.vertices[(i + 1) % n][0] - o[0],
                self.vertices[(i + 1) % n][1] - o[1],
            ];
            let c = p[0] * q[1] - q[0] * p[1];
            cx += (p[0] + q[0]) * c;
            cy += (p[1] + q[1]) * c;
        }
        [o[0] + cx / (6.0 * a), o[1] + cy / (6.0 * a)]
    }

    /// Distance from `p` to the nearest edge (negative if outside).
    pub fn depth(&self, p: Point) -> f64 {
        let n = self.vertices.len();
        let mut d = f64::INFINITY;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let e = [b[0] - a[0], b[1] - a[1]];
            let len = e[0].hypot(e[1]);
            if len == 0.0 {
                continue;
            }
            // Inward normal of a CCW polygon is the left normal.
            let dist = (e[0] * (p[1] - a[1]) - e[1] * (p[0] - a[0])) / len;
            d = d.min(dist);
        }
        d
    }

    pub fn contains(&self, p: Point) -> bool {
        self.depth(p) > 0.0
    }

    /// Interior point that is well away from every edge: start at the
    /// centroid and climb the minimum edge distance.
    pub fn representative_point(&self) -> (Point, f64) {
        let mut p = self.centroid();
        let mut best = self.depth(p);
        let n = self.vertices.len();
        if n < 3 {
            return (p, best);
        }
        let mut step = 0.5 * best.max(1e-3 * self.diameter());
        for _ in 0..60 {
            // Inward normal of the nearest edge.
            let mut worst = (f64::INFINITY, [0.0, 0.0]);
            for i in 0..n {
                let a = self.vertices[i];
                let b = self.vertices[(i + 1) % n];
                let e = [b[0] - a[0], b[1] - a[1]];
                let len = e[0].hypot(e[1]);
                if len == 0.0 {
                    continue;
                }
                let dist = (e[0] * (p[1] - a[1]) - e[1] * (p[0] - a[0])) / len;
                if dist < worst.0 {
                    worst = (dist, [-e[1] / len, e[0] / len]);
                }
            }
            let cand = [p[0] + step * worst.1[0], p[1] + step * worst.1[1]];
            let d = self.depth(cand);
            if d > best {
                p = cand;
                best = d;
            } else {
                step *= 0.5;
            }
        }
        (p, best)
    }

    pub fn diameter(&self) -> f64 {
        let mut d = 0.0_f64;
        for a in &self.vertices {
            for b in &self.vertices {
                d = d.max((a[0] - b[0]).hypot(a[1] - b[1]));
            }
        }
        d
    }

    /// Part of the polygon where `line.value(p)·side >= 0`.
    pub fn clip(&self, line: &Line, side: f64) -> Polygon {
        let n = self.vertices.len();
        let mut out = Vec::with_capacity(n + 1);
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let va = side * line.value(a);
            let vb = side * line.value(b);
            if va >= 0.0 {
                out.push(a);
            }
            if (va > 0.0 && vb < 0.0) || (va < 0.0 && vb > 0.0) {
                let t = va / (va - vb);
                out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
            }
        }
        dedup_points(&mut out);
        Polygon { vertices: out }
    }

    /// Intersection of two convex polygons.
    pub fn intersect(&self, other: &Polygon) -> Polygon {
        let n = other.vertices.len();
        let mut out = self.clone();
        for i in 0..n {
            if out.is_empty() {
                break;
            }
            let a = other.vertices[i];
            let b = other.vertices[(i + 1) % n];
            // Left side of a CCW edge is inside.
            let line = Line::new(-(b[1] - a[1]), b[0] - a[0], (b[1] - a[1]) * a[0] - (b[0] - a[0]) * a[1]);
            if line.normal_norm() == 0.0 {
                continue;
            }
            out = out.clip(&line, 1.0);
        }
        out
    }

    pub fn is_convex(&self) -> bool {
        let n = self.vertices.len();
        if n < 3 {
            return false;
        }
        let scale = self.diameter().powi(2);
        let mut sign = 0.0;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let c = self.vertices[(i + 2) % n];
            let cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
            if cross.abs() <= 1e-12 * scale {
                continue;
            }
            if sign == 0.0 {
                sign = cross.signum();
            } else if cross.signum() != sign {
                return false;
            }
        }
        true
    }
}

fn dedup_points(v: &mut Vec<Point>) {
    let scale = v
        .iter()
        .fold(0.0_f64, |m, p| m.max(p[0].abs()).max(p[1].abs()))
        .max(1e-300);
    let tol = 1e-13 * scale;
    let close = |a: &Point, b: &Point| (a[0] - b[0]).abs() <= tol && (a[1] - b[1]).abs() <= tol;
    v.dedup_by(|a, b| close(a, b));
    while v.len() > 1 && close(&v[0], &v[v.len() - 1]) {
        v.pop();
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArrangementFace {
    pub polygon: Polygon,
    /// Side of every line: `+1` where `value > 0`, `-1` otherwise.
    pub signs: Vec<i8>,
    pub rep: Point,
    /// Distance from `rep` to the nearest edge.
    pub depth: f64,
    /// True when part of the face boundary is the box.
    pub truncated: bool,
}

/// Two faces separated by exactly one line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Adjacency {
    pub negative: usize,
    pub positive: usize,
    pub line: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Arrangement {
    pub bbox: BBox,
    pub faces: Vec<ArrangementFace>,
    pub adjacency: Vec<Adjacency>,
}

/// Subdivide `bbox` by `lines`. Lines missing the box leave the faces
/// unsplit but still contribute a sign.
pub fn arrangement(lines: &[Line], bbox: BBox) -> Arrangement {
    let box_area = bbox.width() * bbox.height();
    let min_area = 1e-18 * box_area;
    let tol = 1e-13 * bbox.size();
    let mut faces: Vec<(Polygon, Vec<i8>)> = vec![(bbox.polygon(), Vec::with_capacity(lines.len()))];
    for line in lines {
        let n = line.normal_norm();
        let mut next = Vec::with_capacity(faces.len() * 2);
        for (poly, signs) in faces {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &v in &poly.vertices {
                let d = line.value(v) / n;
                lo = lo.min(d);
                hi = hi.max(d);
            }
            if lo >= -tol || hi <= tol {
                let s = if lo + hi >= 0.0 { 1 } else { -1 };
                let mut signs = signs;
                signs.push(s);
                next.push((poly, signs));
                continue;
            }
            let pos = poly.clip(line, 1.0);
            let neg = poly.clip(line, -1.0);
            let (pa, na) = (pos.area(), neg.area());
            if pa <= min_area || na <= min_area {
                let mut signs = signs;
                signs.push(if pa >= na { 1 } else { -1 });
                next.push((poly, signs));
                continue;
            }
            let mut sp = signs.clone();
            sp.push(1);
            let mut sn = signs;
            sn.push(-1);
            next.push((pos, sp));
            next.push((neg, sn));
        }
        faces = next;
    }

    let edge_tol = 1e-9 * bbox.size();
    let faces: Vec<ArrangementFace> = faces
        .into_iter()
        .map(|(polygon, signs)| {
            let (rep, depth) = polygon.representative_point();
            let truncated = polygon.vertices.windows(2).any(|w| {
                bbox.on_edge(w[0], edge_tol) && bbox.on_edge(w[1], edge_tol)
            }) || polygon.vertices.iter().all(|v| bbox.on_edge(*v, edge_tol));
            ArrangementFace {
                polygon,
                signs,
                rep,
                depth,
                truncated,
            }
        })
        .collect();

    let index: HashMap<&[i8], usize> = faces
        .iter()
        .enumerate()
        .map(|(i, f)| (f.signs.as_slice(), i))
        .collect();
    let mut adjacency = Vec::new();
    for (i, f) in faces.iter().enumerate() {
        let mut key = f.signs.clone();
        for k in 0..key.len() {
            if key[k] != -1 {
                continue;
            }
            key[k] = 1;
            if let Some(&j) = index.get(key.as_slice()) {
                adjacency.push(Adjacency {
                    negative: i,
                    positive: j,
                    line: k,
                });
            }
            key[k] = -1;
        }
    }
    Arrangement {
        bbox,
        faces,
        adjacency,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_box() -> BBox {
        BBox::square(10.0)
    }

    #[test]
    fn no_lines_is_one_face() {
        let a = arrangement(&[], unit_box());
        assert_eq!(a.faces.len(), 1);
        assert!((a.faces[0].polygon.area() - 400.0).abs() < 1e-9);
        assert!(a.adjacency.is_empty());
    }

    #[test]
    fn two_crossing_lines_make_four_faces() {
        let lines = [Line::new(1.0, 0.0, -1.0), Line::new(0.0, 1.0, 2.0)];
        let a = arrangement(&lines, unit_box());
        assert_eq!(a.faces.len(), 4);
        assert_eq!(a.adjacency.len(), 4);
        let total: f64 = a.faces.iter().map(|f| f.polygon.area()).sum();
        assert!((total - 400.0).abs() < 1e-9);
    }

    #[test]
    fn three_general_lines_make_seven_faces() {
        let lines = [
            Line::new(1.0, 0.0, 0.0),
            Line::new(0.0, 1.0, 0.0),
            Line::new(1.0, 1.0, -1.0),
        ];
        let a = arrangement(&lines, unit_box());
        assert_eq!(a.faces.len(), 7);
        for f in &a.faces {
            assert!(f.polygon.is_convex());
            assert!(f.polygon.contains(f.rep));
            for (k, l) in lines.iter().enumerate() {
                assert_eq!(l.value(f.rep) > 0.0, f.signs[k] > 0);
            }
        }
    }

    #[test]
    fn line_outside_box_does_not_split() {
        let lines = [Line::new(1.0, 0.0, -100.0)];
        let a = arrangement(&lines, unit_box());
        assert_eq!(a.faces.len(), 1);
        assert_eq!(a.faces[0].signs, vec![-1]);
    }

    #[test]
    fn auto_box_contains_intersections() {
        let lines = [Line::new(1.0, 0.0, -3.0), Line::new(1.0, 1e-3, 0.0)];
        let b = auto_box(&lines);
        let p = lines[0].intersection(&lines[1]).unwrap();
        assert!(b.contains_strictly(p));
    }

    #[test]
    fn convex_intersection() {
        let a = BBox::square(1.0).polygon();
        let b = Polygon::new(vec![[0.0, -2.0], [2.0, 0.0], [0.0, 2.0], [-2.0, 0.0]]);
        let c = a.intersect(&b);
        assert!((c.area() - 4.0).abs() < 1e-12);
        let d = Polygon::new(vec![[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [0.0, 2.0]]);
        assert!((a.intersect(&d).area() - 1.0).abs() < 1e-12);
        let far = Polygon::new(vec![[5.0, 5.0], [6.0, 5.0], [6.0, 6.0]]);
        assert!(a.intersect(&far).area() < 1e-12);
    }

    #[test]
    fn representative_point_moves_off_thin_edges() {
        let p = Polygon::new(vec![[0.0, 0.0], [10.0, 0.0], [0.0, 0.01]]);
        let (rep, depth) = p.representative_point();
        assert!(p.contains(rep));
        assert!(depth > 0.003);
    }
}
