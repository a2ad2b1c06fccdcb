//! Fixed-`r3` cross-sections: singular frequencies, boundary lines in the
//! `(r1, r2)` plane, transition signs, and verified stable polygons.

use std::collections::VecDeque;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::curve::SingularCurve;
use crate::error::{Error, Result};
use crate::gamma_region::{q_basis, GammaRegion, QBasis};
use crate::geometry::{arrangement, auto_box, Arrangement, BBox, Line, Point, Polygon};
use crate::plant::{PlantModel, QuasiPlant};
use crate::polynomial::{root_census, RealPoly, RootCensus, DEFAULT_BOUNDARY_TOL};

/// Tolerance for merging coincident lines (unit normals and offsets).
const MERGE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingularFrequency {
    /// `ω` for the half-plane, `α ∈ [0, π]` for circles.
    pub param: f64,
    pub location: Complex64,
    pub is_real_axis: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineKind {
    /// Crossing through a boundary point at a singular frequency.
    Frequency,
    /// The leading coefficient vanishes: a root escapes through infinity.
    DegreeDrop,
    /// Neutral delay loops: infinitely many roots approach the axis on
    /// `kD = ±b_n/a_m`.
    InfinityRoot,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryLine {
    pub h1: f64,
    pub h2: f64,
    pub h0: f64,
    pub kind: LineKind,
    /// Boundary parameter of the source frequency (absent for degree drops).
    pub omega: Option<f64>,
    pub source: Option<SingularFrequency>,
    /// `+1` when increasing `r_i` across the line moves the crossing root
    /// into the region, `-1` when it moves it out, `0` when `r_i` has no
    /// first-order effect there.
    pub e1: i8,
    pub e2: i8,
    pub crossing_size: u32,
    /// Change of the inside count when crossing toward `value > 0`; `None`
    /// when the transition is degenerate.
    pub jump: Option<i32>,
}

impl BoundaryLine {
    pub fn line(&self) -> Line {
        Line::new(self.h1, self.h2, self.h0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Diagnostic {
    SingularCancellation { param: f64 },
    DegenerateEigenvalue { param: f64 },
    /// Verification found roots on the boundary; the face is not classified.
    FlaggedFace { face: usize },
    /// Verification could not decide this face.
    Unverified { face: usize, reason: String },
}

/// Result of checking one parameter point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointCheck {
    /// Number of roots not strictly inside (`N - inside` for polynomials).
    pub unstable: i64,
    /// False when roots sit on the boundary within tolerance.
    pub clean: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub census: Option<RootCensus>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Face {
    pub polygon: Polygon,
    pub rep: Point,
    pub depth: f64,
    pub truncated: bool,
    pub propagated_unstable: Option<i64>,
    pub check: Option<PointCheck>,
    pub stable: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Slice {
    pub r3: f64,
    pub frequencies: Vec<SingularFrequency>,
    pub lines: Vec<BoundaryLine>,
    pub bbox: BBox,
    pub faces: Vec<Face>,
    pub diagnostics: Vec<Diagnostic>,
}

impl Slice {
    pub fn stable_faces(&self) -> impl Iterator<Item = &Face> {
        self.faces.iter().filter(|f| f.stable)
    }

    pub fn stable_count(&self) -> usize {
        self.stable_faces().count()
    }

    pub fn stable_area(&self) -> f64 {
        self.stable_faces().map(|f| f.polygon.area()).sum()
    }

    /// Number of connected pieces of the stable set (faces sharing an edge
    /// or a vertex are joined).
    pub fn stable_components(&self) -> usize {
        let faces: Vec<&Face> = self.stable_faces().collect();
        let n = faces.len();
        let tol = 1e-9 * self.bbox.size();
        let touch = |a: &Polygon, b: &Polygon| {
            a.vertices.iter().any(|p| {
                b.vertices
                    .iter()
                    .any(|q| (p[0] - q[0]).abs() <= tol && (p[1] - q[1]).abs() <= tol)
            })
        };
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], i: usize) -> usize {
            let mut i = i;
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        for i in 0..n {
            for j in i + 1..n {
                if touch(&faces[i].polygon, &faces[j].polygon) {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    parent[a] = b;
                }
            }
        }
        (0..n).filter(|&i| find(&mut parent, i) == i).count()
    }
}

/// Closed-loop function evaluated on a boundary point: value, `∂/∂z` and
/// `∂/∂r1`, `∂/∂r2`.
pub(crate) enum Characteristic<'a> {
    Poly {
        plant: &'a PlantModel,
        basis: QBasis,
    },
    Quasi {
        plant: &'a QuasiPlant,
        basis: QBasis,
    },
}

impl Characteristic<'_> {
    fn eval(&self, z: Complex64, r: [f64; 3]) -> (Complex64, Complex64, [Complex64; 2], f64) {
        let (a, b, basis) = match self {
            Characteristic::Poly { plant, basis } => (&plant.a, &plant.b, basis),
            Characteristic::Quasi { plant, basis } => (&plant.a, &plant.b, basis),
        };
        let (av, ad) = a.eval_with_derivative(z);
        let (bv, bd) = b.eval_with_derivative(z);
        let d = basis.eval(z);
        let dd = [
            basis.delta1.derivative().eval_complex(z),
            basis.delta2.derivative().eval_complex(z),
            basis.delta3.derivative().eval_complex(z),
        ];
        let q = d[0] * r[0] + d[1] * r[1] + d[2] * r[2];
        let qd = dd[0] * r[0] + dd[1] * r[1] + dd[2] * r[2];
        let (bterm, bdterm) = match self {
            Characteristic::Poly { .. } => (bv, bd),
            Characteristic::Quasi { plant, .. } => {
                let e = (z * plant.l).exp();
                (bv * e, (bd + bv * plant.l) * e)
            }
        };
        let p = av * q + bterm;
        let terms = [ad * q, av * qd, bdterm];
        let dp = terms[0] + terms[1] + terms[2];
        let scale = terms.iter().map(|t| t.norm()).fold(0.0, f64::max);
        (p, dp, [av * d[0], av * d[1]], scale)
    }
}

/// Inward velocities `(ê1, ê2)` of the root at `z` under `r1`, `r2`.
fn inward_rates(
    ch: &Characteristic<'_>,
    region: &GammaRegion,
    z: Complex64,
    line: &Line,
    r3: f64,
) -> Option<[f64; 2]> {
    let foot = line.foot();
    let dir = line.direction();
    let span = foot[0].hypot(foot[1]).max(1.0);
    let normal = region.outward_normal(z);
    for t in [0.0, 0.37, -0.61, 1.7] {
        let p = [foot[0] + t * span * dir[0], foot[1] + t * span * dir[1]];
        let (_, dp, dr, scale) = ch.eval(z, [p[0], p[1], r3]);
        if dp.norm() <= 1e-9 * scale || dp.norm() == 0.0 {
            continue;
        }
        let rates = dr.map(|d| {
            let mu = -d / dp;
            -(mu * normal.conj()).re
        });
        return Some(rates);
    }
    None
}

fn sign_of(v: f64, scale: f64) -> i8 {
    if v.abs() <= 1e-12 * scale {
        0
    } else if v > 0.0 {
        1
    } else {
        -1
    }
}

/// Line and transition data for one singular frequency, or a diagnostic.
pub(crate) fn line_from_parts(
    ch: &Characteristic<'_>,
    region: &GammaRegion,
    r3: f64,
    f: SingularFrequency,
    h: [f64; 3],
) -> (BoundaryLine, Option<Diagnostic>) {
    let line = Line::new(h[0], h[1], h[2]);
    let crossing_size = if f.is_real_axis { 1 } else { 2 };
    let mut out = BoundaryLine {
        h1: h[0],
        h2: h[1],
        h0: h[2],
        kind: LineKind::Frequency,
        omega: Some(f.param),
        source: Some(f),
        e1: 0,
        e2: 0,
        crossing_size,
        jump: None,
    };
    match inward_rates(ch, region, f.location, &line, r3) {
        Some(rates) => {
            let scale = rates[0].abs() + rates[1].abs();
            out.e1 = sign_of(rates[0], scale);
            out.e2 = sign_of(rates[1], scale);
            let drive = h[0] * rates[0] + h[1] * rates[1];
            let s = sign_of(drive, (h[0].abs() * rates[0].abs() + h[1].abs() * rates[1].abs()).max(1e-300));
            if s == 0 {
                (out, Some(Diagnostic::DegenerateEigenvalue { param: f.param }))
            } else {
                out.jump = Some(crossing_size as i32 * s as i32);
                (out, None)
            }
        }
        None => (out, Some(Diagnostic::DegenerateEigenvalue { param: f.param })),
    }
}

/// Precomputed per-plant data for slicing the polynomial case.
pub struct Slicer<'a> {
    plant: &'a PlantModel,
    region: GammaRegion,
    basis: QBasis,
    curve: SingularCurve,
}

impl<'a> Slicer<'a> {
    pub fn new(plant: &'a PlantModel, region: &GammaRegion) -> Result<Self> {
        if plant.is_delay() {
            return Err(Error::Precondition(
                "delay plants are sliced by the delay module".into(),
            ));
        }
        Ok(Slicer {
            plant,
            region: *region,
            basis: q_basis(region),
            curve: SingularCurve::new(plant, region)?,
        })
    }

    pub fn curve(&self) -> &SingularCurve {
        &self.curve
    }

    pub fn plant(&self) -> &PlantModel {
        self.plant
    }

    pub fn region(&self) -> &GammaRegion {
        &self.region
    }

    fn characteristic(&self) -> Characteristic<'a> {
        Characteristic::Poly {
            plant: self.plant,
            basis: self.basis.clone(),
        }
    }

    /// All singular frequencies at `r3`, real-axis points first, then by
    /// increasing parameter. Cancellations are reported as diagnostics.
    pub fn frequencies(&self, r3: f64) -> Result<(Vec<SingularFrequency>, Vec<Diagnostic>)> {
        let sol = self.curve.solve(r3)?;
        let mut freqs = Vec::new();
        let mut diags = Vec::new();
        let axis = self.region.real_axis_points();
        freqs.push(SingularFrequency {
            param: axis[0].0,
            location: Complex64::new(axis[0].1, 0.0),
            is_real_axis: true,
        });
        for &x in &sol.xs {
            freqs.push(SingularFrequency {
                param: self.curve.param_of(x),
                location: self.curve.point(x),
                is_real_axis: false,
            });
        }
        for &(param, z) in axis.iter().skip(1) {
            freqs.push(SingularFrequency {
                param,
                location: Complex64::new(z, 0.0),
                is_real_axis: true,
            });
        }
        for &x in &sol.cancellations {
            diags.push(Diagnostic::SingularCancellation {
                param: self.curve.param_of(x),
            });
        }
        Ok((freqs, diags))
    }

    /// Line coefficients at a singular frequency; `None` when `A·E`
    /// vanishes there.
    pub fn line_coefficients(&self, r3: f64, f: &SingularFrequency) -> Option<[f64; 3]> {
        let z = f.location;
        let a = self.plant.a.eval_complex(z);
        let b = self.plant.b.eval_complex(z);
        let d = self.basis.eval(z);
        if f.is_real_axis {
            let scale = self.plant.a.max_abs_coeff() * z.norm().max(1.0).powi(self.plant.m() as i32);
            if a.norm() <= 1e-12 * scale {
                return None;
            }
            return Some([(a * d[0]).re, (a * d[1]).re, (a * d[2] * r3 + b).re]);
        }
        let e = self.region.line_decoupler(z);
        let ae = a * e;
        if ae.norm() == 0.0 {
            return None;
        }
        Some([
            (d[0] / e).re,
            (d[1] / e).re,
            r3 * (d[2] / e).re + (b / ae).re,
        ])
    }

    pub fn boundary_line(&self, r3: f64, f: SingularFrequency) -> Result<(BoundaryLine, Option<Diagnostic>)> {
        let h = self
            .line_coefficients(r3, &f)
            .ok_or(Error::SingularCancellation { param: f.param })?;
        Ok(line_from_parts(&self.characteristic(), &self.region, r3, f, h))
    }

    /// The line where the leading coefficient of `p` vanishes (half-plane,
    /// `deg B <= deg A + 2` only).
    pub fn degree_drop_line(&self, r3: f64) -> Option<BoundaryLine> {
        let GammaRegion::Hurwitz { sigma0 } = self.region else {
            return None;
        };
        let m = self.plant.m();
        if self.plant.n() > m + 2 {
            return None;
        }
        let a = self.plant.a.shift(sigma0);
        let b = self.plant.b.shift(sigma0);
        let am = a.leading();
        let h0 = b.coeff(m + 2);
        let r2 = -h0 / am;
        // Next coefficient of p(x + σ0) on the line, with Q = r1 + r2 x² + r3 x.
        let a_prev = if m >= 1 { a.coeff(m - 1) } else { 0.0 };
        let c = a_prev * r2 + am * r3 + b.coeff(m + 1);
        let scale = (a_prev * r2).abs() + (am * r3).abs() + b.coeff(m + 1).abs();
        let s = sign_of(c, scale.max(1e-300));
        if s == 0 {
            return None;
        }
        Some(BoundaryLine {
            h1: 0.0,
            h2: am,
            h0,
            kind: LineKind::DegreeDrop,
            omega: None,
            source: None,
            e1: 0,
            e2: (s as f64 * am.signum()) as i8,
            crossing_size: 1,
            jump: Some(s as i32),
        })
    }

    pub fn check_point(&self, r: [f64; 3]) -> Result<PointCheck> {
        let census = verify_census(self.plant, &self.region, r)?;
        let n = self.plant.nominal_degree() as i64;
        Ok(PointCheck {
            unstable: n - census.inside as i64,
            clean: census.on_boundary == 0,
            census: Some(census),
        })
    }

    pub fn slice(&self, r3: f64) -> Result<Slice> {
        let (frequencies, mut diagnostics) = self.frequencies(r3)?;
        let ch = self.characteristic();
        let mut lines = Vec::new();
        for f in &frequencies {
            match self.line_coefficients(r3, f) {
                Some(h) => {
                    let (line, diag) = line_from_parts(&ch, &self.region, r3, *f, h);
                    diagnostics.extend(diag);
                    lines.push(line);
                }
                None => diagnostics.push(Diagnostic::SingularCancellation { param: f.param }),
            }
        }
        lines.extend(self.degree_drop_line(r3));
        let bbox = auto_box(&lines.iter().map(BoundaryLine::line).collect::<Vec<_>>());
        assemble(r3, frequencies, lines, diagnostics, bbox, |p| {
            self.check_point([p[0], p[1], r3])
        })
    }
}

/// Coincident lines merged with summed jumps.
fn merge_lines(lines: &[BoundaryLine], scale: f64) -> Vec<(Line, Option<i32>)> {
    let mut merged: Vec<(Line, Option<i32>)> = Vec::new();
    for l in lines {
        let (canon, flipped) = l.line().canonical();
        let jump = l.jump.map(|j| if flipped { -j } else { j });
        let hit = merged.iter_mut().find(|(m, _)| {
            (m.h1 - canon.h1).abs() <= MERGE_TOL
                && (m.h2 - canon.h2).abs() <= MERGE_TOL
                && (m.h0 - canon.h0).abs() <= MERGE_TOL * scale
        });
        match hit {
            Some((_, j)) => {
                *j = match (*j, jump) {
                    (Some(a), Some(b)) => Some(a + b),
                    _ => None,
                }
            }
            None => merged.push((canon, jump)),
        }
    }
    merged.retain(|(_, j)| *j != Some(0));
    merged
}

/// Build the arrangement, propagate counts from a reference face and
/// verify every face with `check`.
pub(crate) fn assemble(
    r3: f64,
    frequencies: Vec<SingularFrequency>,
    lines: Vec<BoundaryLine>,
    mut diagnostics: Vec<Diagnostic>,
    bbox: BBox,
    check: impl Fn(Point) -> Result<PointCheck>,
) -> Result<Slice> {
    let scale = bbox.size() / 20.0;
    let merged = merge_lines(&lines, scale);
    let geo_lines: Vec<Line> = merged.iter().map(|(l, _)| *l).collect();
    let arr: Arrangement = arrangement(&geo_lines, bbox);

    let mut checks = Vec::with_capacity(arr.faces.len());
    for (i, f) in arr.faces.iter().enumerate() {
        match check(f.rep) {
            Ok(c) => checks.push(Some(c)),
            Err(e @ (Error::Inconclusive { .. } | Error::Degree(_) | Error::NoConvergence(_))) => {
                diagnostics.push(Diagnostic::Unverified {
                    face: i,
                    reason: e.to_string(),
                });
                checks.push(None);
            }
            Err(e) => return Err(e),
        }
    }

    // Reference: deepest face with a clean check.
    let reference = (0..arr.faces.len())
        .filter(|&i| matches!(&checks[i], Some(c) if c.clean))
        .max_by(|&a, &b| arr.faces[a].depth.total_cmp(&arr.faces[b].depth));

    let mut propagated: Vec<Option<i64>> = vec![None; arr.faces.len()];
    if let Some(r) = reference {
        propagated[r] = checks[r].as_ref().map(|c| c.unstable);
        let mut neighbours: Vec<Vec<(usize, i64)>> = vec![Vec::new(); arr.faces.len()];
        for adj in &arr.adjacency {
            if let Some(j) = merged[adj.line].1 {
                // Inside count rises by j toward the positive side.
                neighbours[adj.negative].push((adj.positive, -(j as i64)));
                neighbours[adj.positive].push((adj.negative, j as i64));
            }
        }
        let mut queue = VecDeque::from([r]);
        while let Some(i) = queue.pop_front() {
            let u = propagated[i].expect("queued faces are labelled");
            for &(j, d) in &neighbours[i] {
                if propagated[j].is_none() {
                    propagated[j] = Some(u + d);
                    queue.push_back(j);
                }
            }
        }
    }

    let mut faces = Vec::with_capacity(arr.faces.len());
    for (i, (f, c)) in arr.faces.into_iter().zip(checks).enumerate() {
        let mut stable = false;
        if let Some(c) = &c {
            if !c.clean {
                diagnostics.push(Diagnostic::FlaggedFace { face: i });
            } else {
                if let Some(p) = propagated[i] {
                    if p != c.unstable {
                        return Err(Error::Consistency {
                            face: i,
                            propagated: p,
                            verified: c.unstable,
                        });
                    }
                }
                stable = c.unstable == 0;
            }
        }
        faces.push(Face {
            polygon: f.polygon,
            rep: f.rep,
            depth: f.depth,
            truncated: f.truncated,
            propagated_unstable: propagated[i],
            check: c,
            stable,
        });
    }

    Ok(Slice {
        r3,
        frequencies,
        lines,
        bbox,
        faces,
        diagnostics,
    })
}

fn verify_census(plant: &PlantModel, region: &GammaRegion, r: [f64; 3]) -> Result<RootCensus> {
    let p = plant.closed_loop(region, r);
    if p.is_zero() {
        return Err(Error::Degree("closed-loop polynomial vanishes".into()));
    }
    if p.degree() == 0 {
        return Ok(RootCensus {
            inside: 0,
            on_boundary: 0,
            outside: 0,
            roots: Vec::new(),
        });
    }
    root_census(&p, region, DEFAULT_BOUNDARY_TOL)
}

pub fn singular_frequencies(
    plant: &PlantModel,
    region: &GammaRegion,
    r3: f64,
) -> Result<Vec<SingularFrequency>> {
    Ok(Slicer::new(plant, region)?.frequencies(r3)?.0)
}

pub fn boundary_line(
    plant: &PlantModel,
    region: &GammaRegion,
    r3: f64,
    f: SingularFrequency,
) -> Result<BoundaryLine> {
    Ok(Slicer::new(plant, region)?.boundary_line(r3, f)?.0)
}

pub fn transition_signs(
    plant: &PlantModel,
    region: &GammaRegion,
    r3: f64,
    f: SingularFrequency,
) -> Result<(i8, i8)> {
    let (line, diag) = Slicer::new(plant, region)?.boundary_line(r3, f)?;
    match diag {
        Some(Diagnostic::DegenerateEigenvalue { param }) => Err(Error::DegenerateEigenvalue { param }),
        _ => Ok((line.e1, line.e2)),
    }
}

pub fn arrangement_faces(lines: &[BoundaryLine], bbox: Option<BBox>) -> Arrangement {
    let geo: Vec<Line> = lines.iter().map(BoundaryLine::line).collect();
    let bbox = bbox.unwrap_or_else(|| auto_box(&geo));
    arrangement(&geo, bbox)
}

pub fn compute_slice(plant: &PlantModel, region: &GammaRegion, r3: f64) -> Result<Slice> {
    Slicer::new(plant, region)?.slice(r3)
}

/// Root census of `A·Q(r) + B`.
pub fn verify_point(plant: &PlantModel, region: &GammaRegion, r1: f64, r2: f64, r3: f64) -> Result<RootCensus> {
    verify_census(plant, region, [r1, r2, r3])
}

/// True when every root of the closed loop at `r` is strictly inside.
pub fn is_stable_point(plant: &PlantModel, region: &GammaRegion, r: [f64; 3]) -> Result<bool> {
    let c = verify_census(plant, region, r)?;
    Ok(c.all_inside(plant.nominal_degree()))
}

/// Convenience for callers holding just polynomials.
pub fn closed_loop(plant: &PlantModel, region: &GammaRegion, r: [f64; 3]) -> RealPoly {
    plant.closed_loop(region, r)
}
