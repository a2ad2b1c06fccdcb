//! The `r3` (kP) problem: which slices can host stable polygons at all.

use serde::{Deserialize, Serialize};

use crate::curve::SingularCurve;
use crate::error::{Error, Result};
use crate::gamma_region::{decoupling_function, DecouplingChoice, GammaRegion};
use crate::plant::PlantModel;
use crate::polynomial::{root_census, RealPoly, DEFAULT_BOUNDARY_TOL};
use crate::slicing::Slicer;

/// Samples per interval for the concurrency sweep.
pub const PEAK_SWEEP_SAMPLES: usize = 2001;

/// `E(n)`: `n` for even `n`, `n - 1` for odd `n`.
pub fn even_floor(n: i64) -> Result<i64> {
    if n < 0 {
        return Err(Error::Domain(format!("E(n) needs n >= 0, got {n}")));
    }
    Ok(n - n % 2)
}

fn even_floor_clamped(n: i64) -> i64 {
    let n = n.max(0);
    n - n % 2
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KpPlot {
    /// `(param, r3)` over the whole range, in order.
    pub samples: Vec<(f64, f64)>,
    /// Continuous pieces between poles of the curve.
    pub branches: Vec<Vec<(f64, f64)>>,
    pub extrema: Vec<(f64, f64)>,
}

/// Sample the curve `r3(param)` on `(lo, hi)`; `param` is `ω` or `α`.
pub fn kp_plot(
    plant: &PlantModel,
    region: &GammaRegion,
    param_range: (f64, f64),
    samples: usize,
) -> Result<KpPlot> {
    let curve = SingularCurve::new(plant, region)?;
    let (lo, hi) = param_range;
    if !(hi > lo) || samples < 2 {
        return Err(Error::Domain(format!("empty parameter range ({lo}, {hi})")));
    }
    let poles: Vec<f64> = pole_params(&curve)?;
    let mut plot = KpPlot::default();
    if lo <= 0.0 {
        if let Some(v) = curve.limit_at_zero() {
            plot.samples.push((0.0, v));
        }
    }
    let start = if lo <= 0.0 { hi * 1e-6 } else { lo };
    let mut branch: Vec<(f64, f64)> = plot.samples.clone();
    let mut prev = start;
    for k in 0..samples {
        let param = start + (hi - start) * k as f64 / (samples - 1) as f64;
        if poles.iter().any(|&p| p > prev && p <= param) && !branch.is_empty() {
            plot.branches.push(std::mem::take(&mut branch));
        }
        prev = param;
        let v = curve.r3_at(curve.x_of(param));
        if !v.is_finite() {
            continue;
        }
        plot.samples.push((param, v));
        branch.push((param, v));
    }
    if !branch.is_empty() {
        plot.branches.push(branch);
    }
    plot.extrema = curve
        .extrema()?
        .into_iter()
        .map(|(x, v)| (curve.param_of(x), v))
        .filter(|(p, _)| *p >= lo && *p <= hi)
        .collect();
    Ok(plot)
}

fn pole_params(curve: &SingularCurve) -> Result<Vec<f64>> {
    if curve.den.degree() == 0 {
        return Ok(Vec::new());
    }
    Ok(curve
        .den
        .roots()?
        .into_iter()
        .filter(|z| z.im.abs() <= 1e-6 * z.re.abs().max(1.0) && z.re > 0.0)
        .map(|z| curve.param_of(z.re))
        .collect())
}

/// Root bookkeeping behind a Z threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ZCensus {
    Hurwitz {
        n: usize,
        m: usize,
        p: usize,
        j: usize,
        j0: usize,
    },
    Circle {
        n: usize,
        r: usize,
        /// Boundary zeros of `A·E` other than the two real-axis points.
        j: usize,
        j_plus: usize,
        j_minus: usize,
        /// All boundary zeros of `A·E`.
        j_all: usize,
    },
}

pub fn required_z(plant: &PlantModel, region: &GammaRegion) -> Result<(i64, ZCensus)> {
    required_z_with(plant, region, DecouplingChoice::Default)
}

/// Threshold with an explicit decoupling function (circles only differ).
pub fn required_z_with(
    plant: &PlantModel,
    region: &GammaRegion,
    choice: DecouplingChoice,
) -> Result<(i64, ZCensus)> {
    let n = plant.nominal_degree();
    match *region {
        GammaRegion::Hurwitz { sigma0 } => {
            let a = plant.a.shift(sigma0);
            let unit = GammaRegion::hurwitz();
            let census = root_census(&a, &unit, DEFAULT_BOUNDARY_TOL)?;
            let j0 = census.order_at(num_complex::Complex64::new(0.0, 0.0), 1e-6);
            let (m, p, j) = (a.degree(), census.outside, census.on_boundary);
            let arg = n as i64 - m as i64 + 2 * p as i64 - j as i64 - 1;
            let thr = (even_floor_clamped(arg) - even_floor_clamped(j0 as i64)) / 2;
            Ok((thr, ZCensus::Hurwitz { n, m, p, j, j0 }))
        }
        GammaRegion::Circle { m, rho } => {
            let e = decoupling_function(region, choice)?;
            let ae: RealPoly = &plant.a * &e;
            let census = root_census(&ae, region, DEFAULT_BOUNDARY_TOL)?;
            let tol = 1e-6 * (m.abs() + rho).max(1.0);
            let j_plus = census.order_at(num_complex::Complex64::new(m + rho, 0.0), tol);
            let j_minus = census.order_at(num_complex::Complex64::new(m - rho, 0.0), tol);
            let j_all = census.on_boundary;
            let j = j_all - j_plus - j_minus;
            let r = census.inside;
            let num = 2 * (n as i64 - r as i64)
                - j as i64
                - even_floor_clamped(j_plus as i64)
                - even_floor_clamped(j_minus as i64)
                - 2;
            let thr = (num + 1).div_euclid(2);
            Ok((
                thr,
                ZCensus::Circle {
                    n,
                    r,
                    j,
                    j_plus,
                    j_minus,
                    j_all,
                },
            ))
        }
    }
}

pub fn count_singular_frequencies(plant: &PlantModel, region: &GammaRegion, r3: f64) -> Result<usize> {
    SingularCurve::new(plant, region)?.count(r3)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sufficiency {
    NecessaryOnly,
    NecessaryAndSufficient,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KpInterval {
    pub lo: f64,
    pub hi: f64,
    #[serde(rename = "Z")]
    pub z: usize,
    #[serde(rename = "required_Z")]
    pub required_z: i64,
    pub admissible: bool,
    pub sufficiency: Sufficiency,
    /// Per-member `(Z, required_Z)` for robust intervals.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub members: Vec<(usize, i64)>,
}

impl KpInterval {
    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, r3: f64) -> bool {
        r3 > self.lo && r3 < self.hi
    }
}

/// Delay-free half-plane loops of order at most six, where the counting
/// condition is usually taken as sufficient. It is not always: fixed plant
/// coefficients of mixed sign can rule out every controller. Slices remain
/// the authority.
pub fn count_is_sufficient(plant: &PlantModel, region: &GammaRegion) -> bool {
    region.is_hurwitz() && !plant.is_delay() && plant.nominal_degree() <= 6
}

/// Default `r3` search range: `[-100, 100]` for the half-plane, widened to
/// hold every critical value with 20% margin; for circles the critical
/// values ±20%.
pub fn default_search_range(curve: &SingularCurve) -> Result<(f64, f64)> {
    let crit = curve.critical_values()?;
    let (cmin, cmax) = crit
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if crit.is_empty() {
        return Ok((-100.0, 100.0));
    }
    let span = (cmax - cmin).max(cmax.abs().max(cmin.abs())).max(1e-3);
    let (lo, hi) = (cmin - 0.2 * span, cmax + 0.2 * span);
    if curve.region.is_hurwitz() {
        Ok((lo.min(-100.0), hi.max(100.0)))
    } else {
        Ok((lo, hi))
    }
}

/// Every cell of the search range between consecutive critical values.
pub fn kp_partition(
    plant: &PlantModel,
    region: &GammaRegion,
    search_range: Option<(f64, f64)>,
) -> Result<Vec<KpInterval>> {
    let curve = SingularCurve::new(plant, region)?;
    let (lo, hi) = match search_range {
        Some(r) => r,
        None => default_search_range(&curve)?,
    };
    if !(lo.is_finite() && hi.is_finite() && hi > lo) {
        return Err(Error::Domain(format!("search range ({lo}, {hi}) must be finite")));
    }
    let (required, _) = required_z(plant, region)?;
    let sufficiency = if count_is_sufficient(plant, region) {
        Sufficiency::NecessaryAndSufficient
    } else {
        Sufficiency::NecessaryOnly
    };
    let mut cuts = vec![lo];
    cuts.extend(curve.critical_values()?.into_iter().filter(|&v| v > lo && v < hi));
    cuts.push(hi);
    let mut out = Vec::new();
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b - a <= 1e-12 * a.abs().max(b.abs()).max(1.0) {
            continue;
        }
        let z = match curve.count(0.5 * (a + b)) {
            Ok(z) => z,
            Err(Error::DegenerateSlice { .. }) => continue,
            Err(e) => return Err(e),
        };
        out.push(KpInterval {
            lo: a,
            hi: b,
            z,
            required_z: required,
            admissible: z as i64 >= required,
            sufficiency,
            members: Vec::new(),
        });
    }
    Ok(out)
}

/// Admissible cells only (the counting condition holds).
pub fn admissible_intervals(
    plant: &PlantModel,
    region: &GammaRegion,
    search_range: Option<(f64, f64)>,
) -> Result<Vec<KpInterval>> {
    Ok(kp_partition(plant, region, search_range)?
        .into_iter()
        .filter(|c| c.admissible)
        .collect())
}

/// Merge touching intervals into their union.
pub fn interval_union(cells: &[KpInterval]) -> Vec<(f64, f64)> {
    let mut v: Vec<(f64, f64)> = cells.iter().map(|c| (c.lo, c.hi)).collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (a, b) in v {
        match out.last_mut() {
            Some(last) if a <= last.1 + 1e-12 * last.1.abs().max(1.0) => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityPeak {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub omegas: [f64; 3],
    /// The remainder after dividing out the three boundary factors is
    /// Hurwitz; otherwise the concurrency point is irrelevant.
    pub remainder_stable: bool,
}

fn normalized_lines(slicer: &Slicer<'_>, r3: f64) -> Result<Option<Vec<(f64, [f64; 3])>>> {
    let (freqs, _) = slicer.frequencies(r3)?;
    let mut out = Vec::new();
    for f in freqs.iter().filter(|f| !f.is_real_axis) {
        let Some(h) = slicer.line_coefficients(r3, f) else {
            return Ok(None);
        };
        let n = h[0].hypot(h[1]);
        out.push((f.param, [h[0] / n, h[1] / n, h[2] / n]));
    }
    Ok(Some(out))
}

fn det3(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> f64 {
    a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0]) + a[2] * (b[0] * c[1] - b[1] * c[0])
}

fn triple_det(slicer: &Slicer<'_>, r3: f64, t: [usize; 3], z: usize) -> Option<f64> {
    let lines = normalized_lines(slicer, r3).ok()??;
    if lines.len() != z {
        return None;
    }
    Some(det3(lines[t[0]].1, lines[t[1]].1, lines[t[2]].1))
}

/// Parameter points inside `interval` where three positive-frequency
/// boundary lines are concurrent.
pub fn stability_peaks(
    plant: &PlantModel,
    region: &GammaRegion,
    interval: &KpInterval,
) -> Result<Vec<StabilityPeak>> {
    if !region.is_hurwitz() || plant.is_delay() {
        return Err(Error::Precondition("stability peaks need a delay-free half-plane loop".into()));
    }
    if plant.nominal_degree() <= 6 {
        return Err(Error::Precondition(format!(
            "N = {} <= 6: the counting condition is already sufficient",
            plant.nominal_degree()
        )));
    }
    let slicer = Slicer::new(plant, region)?;
    let n = PEAK_SWEEP_SAMPLES;
    let (lo, hi) = (interval.lo, interval.hi);
    let grid: Vec<f64> = (1..=n).map(|k| lo + (hi - lo) * k as f64 / (n + 1) as f64).collect();
    let mut dets: Vec<Option<Vec<f64>>> = Vec::with_capacity(n);
    let mut z_at = Vec::with_capacity(n);
    for &r3 in &grid {
        match normalized_lines(&slicer, r3)? {
            Some(lines) => {
                let z = lines.len();
                let mut v = Vec::new();
                for i in 0..z {
                    for j in i + 1..z {
                        for k in j + 1..z {
                            v.push(det3(lines[i].1, lines[j].1, lines[k].1));
                        }
                    }
                }
                z_at.push(z);
                dets.push(Some(v));
            }
            None => {
                z_at.push(usize::MAX);
                dets.push(None);
            }
        }
    }
    let mut peaks = Vec::new();
    for s in 0..n - 1 {
        let (Some(d0), Some(d1)) = (&dets[s], &dets[s + 1]) else {
            continue;
        };
        let z = z_at[s];
        if z != z_at[s + 1] || z < 3 {
            continue;
        }
        let mut idx = 0;
        for i in 0..z {
            for j in i + 1..z {
                for k in j + 1..z {
                    let (a, b) = (d0[idx], d1[idx]);
                    idx += 1;
                    if a == 0.0 || a.signum() == b.signum() {
                        continue;
                    }
                    if let Some(peak) = refine_peak(&slicer, plant, region, grid[s], grid[s + 1], [i, j, k], z)? {
                        peaks.push(peak);
                    }
                }
            }
        }
    }
    Ok(peaks)
}

fn refine_peak(
    slicer: &Slicer<'_>,
    plant: &PlantModel,
    region: &GammaRegion,
    mut a: f64,
    mut b: f64,
    t: [usize; 3],
    z: usize,
) -> Result<Option<StabilityPeak>> {
    let Some(mut fa) = triple_det(slicer, a, t, z) else {
        return Ok(None);
    };
    while b - a > 1e-8 * a.abs().max(1.0) * 1e-2 && b - a > 1e-12 {
        let m = 0.5 * (a + b);
        let Some(fm) = triple_det(slicer, m, t, z) else {
            return Ok(None);
        };
        if fm == 0.0 {
            a = m;
            b = m;
            break;
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    let r3 = 0.5 * (a + b);
    let Some(lines) = normalized_lines(slicer, r3)? else {
        return Ok(None);
    };
    if lines.len() != z {
        return Ok(None);
    }
    let (l1, l2, l3) = (lines[t[0]], lines[t[1]], lines[t[2]]);
    // Concurrency must be genuine, not a sign flip through a blow-up.
    if det3(l1.1, l2.1, l3.1).abs() > 1e-6 {
        return Ok(None);
    }
    let g1 = crate::geometry::Line::new(l1.1[0], l1.1[1], l1.1[2]);
    let g3 = crate::geometry::Line::new(l3.1[0], l3.1[1], l3.1[2]);
    let Some(v) = g1.intersection(&g3) else {
        return Ok(None);
    };
    let r = [v[0], v[1], r3];
    let gains = region.to_pid(r)?;
    let p = plant.closed_loop(region, r);
    let sigma0 = match *region {
        GammaRegion::Hurwitz { sigma0 } => sigma0,
        GammaRegion::Circle { .. } => 0.0,
    };
    let mut factor = RealPoly::constant(1.0);
    for w in [l1.0, l2.0, l3.0] {
        factor = &factor * &RealPoly::new(vec![sigma0 * sigma0 + w * w, -2.0 * sigma0, 1.0]);
    }
    let (quot, _) = p.div_rem(&factor)?;
    let remainder_stable = if quot.degree() == 0 {
        !quot.is_zero()
    } else {
        let c = root_census(&quot, region, DEFAULT_BOUNDARY_TOL)?;
        c.all_inside(quot.degree())
    };
    Ok(Some(StabilityPeak {
        kp: gains.kp,
        ki: gains.ki,
        kd: gains.kd,
        omegas: [l1.0, l2.0, l3.0],
        remainder_stable,
    }))
}
