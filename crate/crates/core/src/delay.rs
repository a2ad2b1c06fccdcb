//! Input-delay loops `p = A(s)(kI + kP s + kD s²) + B(s)e^{Ls}`.
//!
//! The kP-plot becomes oscillatory and there are infinitely many singular
//! frequencies; slices use the low-frequency lines plus every further line
//! that still crosses the working box.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gamma_region::{q_basis, GammaRegion};
use crate::geometry::{BBox, Line};
use crate::kp_analysis::{KpInterval, Sufficiency, ZCensus};
use crate::plant::QuasiPlant;
use crate::polynomial::{root_census, RealPoly, DEFAULT_BOUNDARY_TOL};
use crate::slicing::{assemble, line_from_parts, BoundaryLine, LineKind, Characteristic, PointCheck, SingularFrequency, Slice};

pub const DEFAULT_DELTA: f64 = PI;

/// Cutoffs never exceed this many multiples of `1/L`.
const CUTOFF_CAP: f64 = 1e6;

const BISECT_REL: f64 = 1e-10;

/// Singular frequencies split by index parity (`ω′1, ω′3, …` and
/// `ω′2, ω′4, …`).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FrequencyClass {
    pub odd_set: Vec<f64>,
    pub even_set: Vec<f64>,
}

impl FrequencyClass {
    pub fn from_sorted(omegas: &[f64]) -> Self {
        let mut c = FrequencyClass::default();
        for (i, &w) in omegas.iter().enumerate() {
            if i % 2 == 0 {
                c.odd_set.push(w);
            } else {
                c.even_set.push(w);
            }
        }
        c
    }

    /// All frequencies in increasing order.
    pub fn all(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.odd_set.iter().chain(&self.even_set).copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }

    pub fn len(&self) -> usize {
        self.odd_set.len() + self.even_set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Precomputed data for evaluating `H(ω) = (B/A)(jω)e^{jωL}` and the
/// kP-plot `kP(ω) = -Im H / ω`.
pub struct DelayCurve<'a> {
    plant: &'a QuasiPlant,
    a_roots: Vec<Complex64>,
    b_roots: Vec<Complex64>,
    lead_phase: f64,
    step: f64,
    root_scale: f64,
}

fn roots_or_empty(p: &RealPoly) -> Result<Vec<Complex64>> {
    if p.degree() == 0 {
        Ok(Vec::new())
    } else {
        p.roots()
    }
}

impl<'a> DelayCurve<'a> {
    pub fn new(plant: &'a QuasiPlant) -> Result<Self> {
        let a_roots = roots_or_empty(&plant.a)?;
        let b_roots = roots_or_empty(&plant.b)?;
        for z in &a_roots {
            if z.im > 0.0 && z.re.abs() <= 1e-9 * z.norm() {
                return Err(Error::PoleOnAxis { omega: z.im });
            }
        }
        let base = PI / (8.0 * plant.l);
        let mut step = base;
        let mut floor = 0.0f64;
        for z in a_roots.iter().chain(&b_roots) {
            let r = z.norm();
            if r == 0.0 {
                continue;
            }
            step = step.min(r / 16.0).min(z.re.abs().max(1e-4 * r));
            floor = floor.max(1e-6 * r);
        }
        // The floor follows the plant's own scale, not the delay, so short
        // delays keep resolving closely spaced low-frequency roots.
        let step = step.max(floor.min(base));
        let mut curve = DelayCurve {
            plant,
            a_roots,
            b_roots,
            lead_phase: 0.0,
            step,
            root_scale: 0.0,
        };
        curve.root_scale = curve.a_roots.iter().chain(&curve.b_roots).map(|z| z.norm()).fold(0.0, f64::max);
        // Pick the branch whose value at 0⁺ is the principal argument.
        let w0 = step * 1e-3;
        let s = Complex64::new(0.0, w0);
        let principal = (plant.b.eval_complex(s) * plant.a.eval_complex(s).conj()).arg();
        let raw = curve.raw_phase(w0);
        curve.lead_phase = 2.0 * PI * ((principal - raw) / (2.0 * PI)).round();
        Ok(curve)
    }

    pub fn plant(&self) -> &QuasiPlant {
        self.plant
    }

    /// Scan step used for root bracketing.
    pub fn step(&self) -> f64 {
        self.step
    }

    /// Fine steps near the root magnitudes of `A` and `B`, the oscillation
    /// step beyond them.
    fn step_at(&self, omega: f64) -> f64 {
        if omega > 2.0 * self.root_scale {
            PI / (8.0 * self.plant.l)
        } else {
            self.step
        }
    }

    fn raw_phase(&self, omega: f64) -> f64 {
        let s = Complex64::new(0.0, omega);
        let lead = if self.plant.b.leading() * self.plant.a.leading() > 0.0 { 0.0 } else { PI };
        let sum = |roots: &[Complex64]| roots.iter().map(|z| (s - z).arg()).sum::<f64>();
        lead + sum(&self.b_roots) - sum(&self.a_roots)
    }

    /// `α(ω) = |B/A|(jω)` and the continuous phase `φ(ω)` of `(B/A)(jω)`.
    pub fn amp_phase(&self, omega: f64) -> Result<(f64, f64)> {
        let s = Complex64::new(0.0, omega);
        let a = self.plant.a.eval_complex(s);
        if a.norm() == 0.0 {
            return Err(Error::PoleOnAxis { omega });
        }
        let alpha = (self.plant.b.eval_complex(s) / a).norm();
        Ok((alpha, self.raw_phase(omega) + self.lead_phase))
    }

    pub fn h(&self, omega: f64) -> Complex64 {
        let s = Complex64::new(0.0, omega);
        self.plant.b.eval_complex(s) / self.plant.a.eval_complex(s) * Complex64::from_polar(1.0, omega * self.plant.l)
    }

    pub fn kp(&self, omega: f64) -> f64 {
        -self.h(omega).im / omega
    }

    pub fn kp_slope(&self, omega: f64) -> f64 {
        let s = Complex64::new(0.0, omega);
        let (a, da) = self.plant.a.eval_with_derivative(s);
        let (b, db) = self.plant.b.eval_with_derivative(s);
        let r = b / a;
        let dr = (db * a - b * da) / (a * a);
        let e = Complex64::from_polar(1.0, omega * self.plant.l);
        let h = r * e;
        let dh = Complex64::i() * (dr + r * self.plant.l) * e;
        -(dh.im * omega - h.im) / (omega * omega)
    }

    /// `kP(0⁺) = -(R'(0) + L R(0))` with `R = B/A`; `None` when `A(0) = 0`.
    pub fn limit_at_zero(&self) -> Option<f64> {
        let a0 = self.plant.a.coeff(0);
        if a0 == 0.0 {
            return None;
        }
        let (b0, b1, a1) = (self.plant.b.coeff(0), self.plant.b.coeff(1), self.plant.a.coeff(1));
        let r0 = b0 / a0;
        let dr0 = (b1 * a0 - b0 * a1) / (a0 * a0);
        Some(-(dr0 + self.plant.l * r0))
    }

    fn scan_zeros(&self, f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> Vec<f64> {
        let mut out = Vec::new();
        let mut a = lo.max(self.step * 1e-3);
        if hi <= a {
            return out;
        }
        let mut fa = f(a);
        while a < hi {
            let b = (a + self.step_at(a)).min(hi);
            let fb = f(b);
            if fb == 0.0 {
                out.push(b);
            } else if fa != 0.0 && fa.signum() != fb.signum() && fa.is_finite() && fb.is_finite() {
                let (mut x0, mut x1, mut f0) = (a, b, fa);
                while x1 - x0 > BISECT_REL * x1.max(1.0) {
                    let m = 0.5 * (x0 + x1);
                    let fm = f(m);
                    if fm == 0.0 {
                        x0 = m;
                        x1 = m;
                        break;
                    }
                    if fm.signum() == f0.signum() {
                        x0 = m;
                        f0 = fm;
                    } else {
                        x1 = m;
                    }
                }
                out.push(0.5 * (x0 + x1));
            }
            a = b;
            fa = fb;
        }
        out
    }

    /// Positive roots of `kP(ω) = kp` on `(lo, hi]`.
    pub fn roots(&self, kp: f64, lo: f64, hi: f64) -> Vec<f64> {
        self.scan_zeros(|w| self.kp(w) - kp, lo, hi)
    }

    /// Local extrema `(ω, kP(ω))` on `(lo, hi]`.
    pub fn extrema(&self, lo: f64, hi: f64) -> Vec<(f64, f64)> {
        self.scan_zeros(|w| self.kp_slope(w), lo, hi)
            .into_iter()
            .map(|w| (w, self.kp(w)))
            .collect()
    }

    /// Boundary line `kI - ω²kD + Re H = 0`; at `ω = 0` it is
    /// `A(0)kI + B(0) = 0`.
    pub fn line_coefficients(&self, omega: f64) -> Option<[f64; 3]> {
        if omega == 0.0 {
            let a0 = self.plant.a.coeff(0);
            if a0 == 0.0 {
                return None;
            }
            return Some([a0, 0.0, self.plant.b.coeff(0)]);
        }
        Some([1.0, -omega * omega, self.h(omega).re])
    }
}

fn characteristic(plant: &QuasiPlant) -> Characteristic<'_> {
    Characteristic::Quasi {
        plant,
        basis: q_basis(&GammaRegion::hurwitz()),
    }
}

fn frequency_at(omega: f64) -> SingularFrequency {
    SingularFrequency {
        param: omega,
        location: Complex64::new(0.0, omega),
        is_real_axis: omega == 0.0,
    }
}

pub fn amp_phase(plant: &QuasiPlant, omega: f64) -> Result<(f64, f64)> {
    DelayCurve::new(plant)?.amp_phase(omega)
}

pub fn delay_singular_frequencies(plant: &QuasiPlant, kp: f64, omega_max: f64) -> Result<FrequencyClass> {
    if !(omega_max > 0.0) {
        return Err(Error::Domain(format!("omega_max must be positive, got {omega_max}")));
    }
    let curve = DelayCurve::new(plant)?;
    Ok(FrequencyClass::from_sorted(&curve.roots(kp, 0.0, omega_max)))
}

/// Boundary line and transitions at `omega` (a singular frequency for `kp`).
pub fn delay_boundary_line(plant: &QuasiPlant, kp: f64, omega: f64) -> Result<BoundaryLine> {
    let curve = DelayCurve::new(plant)?;
    let h = curve
        .line_coefficients(omega)
        .ok_or(Error::SingularCancellation { param: omega })?;
    let (line, _) = line_from_parts(&characteristic(plant), &GammaRegion::hurwitz(), kp, frequency_at(omega), h);
    Ok(line)
}

/// `kD = ±b_n/a_m` for neutral plants, sorted; `None` for retarded ones.
pub fn infinity_root_boundaries(plant: &QuasiPlant) -> Option<(f64, f64)> {
    if !plant.is_neutral() {
        return None;
    }
    let k = (plant.b.leading() / plant.a.leading()).abs();
    Some((-k, k))
}

/// Census of `A` and the required count for window `l` and offset `δ`.
pub fn delay_required_z(plant: &QuasiPlant, l: u32, delta: f64) -> Result<(i64, ZCensus)> {
    if l == 0 {
        return Err(Error::Domain("window index l must be at least 1".into()));
    }
    let n = plant.b.degree();
    let m = plant.a.degree();
    let (p, j, j0) = if m == 0 {
        (0, 0, 0)
    } else {
        let c = root_census(&plant.a, &GammaRegion::hurwitz(), DEFAULT_BOUNDARY_TOL)?;
        let j0 = c.order_at(Complex64::new(0.0, 0.0), 1e-6);
        (c.outside, c.on_boundary, j0)
    };
    let k = n as f64 - m as f64 + 2.0 * p as f64 - j as f64;
    let x = k / 2.0 + delta / PI;
    if (x - x.round()).abs() < 0.1 {
        return Err(Error::DeltaInvalid { delta });
    }
    let e_j0 = (j0 - j0 % 2) as i64;
    let thr = (x + 2.0 * l as f64).ceil() as i64 - 1 + e_j0 / 2;
    Ok((thr, ZCensus::Hurwitz { n, m, p, j, j0 }))
}

/// `δ = π` unless invalid, otherwise the first valid multiple of `π/8`.
pub fn choose_delta(plant: &QuasiPlant, l: u32) -> Result<f64> {
    let mut tried = vec![DEFAULT_DELTA];
    tried.extend((1..16).map(|k| k as f64 * PI / 8.0));
    for d in tried {
        match delay_required_z(plant, l, d) {
            Ok(_) => return Ok(d),
            Err(Error::DeltaInvalid { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::DeltaInvalid { delta: DEFAULT_DELTA })
}

/// Window `(0, (2lπ + δ)/L)` over which singular frequencies are counted.
pub fn window(plant: &QuasiPlant, l: u32, delta: f64) -> f64 {
    (2.0 * l as f64 * PI + delta) / plant.l
}

/// Cells of the kP range, split at `kP(0⁺)`, the extrema inside the window
/// and the window-edge value.
pub fn delay_partition(
    plant: &QuasiPlant,
    l: u32,
    delta: Option<f64>,
    search_range: Option<(f64, f64)>,
) -> Result<Vec<KpInterval>> {
    let delta = match delta {
        Some(d) => d,
        None => choose_delta(plant, l)?,
    };
    let (required, _) = delay_required_z(plant, l, delta)?;
    let curve = DelayCurve::new(plant)?;
    let w = window(plant, l, delta);
    let mut crit: Vec<f64> = curve.extrema(0.0, w).into_iter().map(|(_, v)| v).collect();
    crit.extend(curve.limit_at_zero());
    crit.push(curve.kp(w));
    crit.retain(|v| v.is_finite());
    crit.sort_by(f64::total_cmp);
    crit.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * a.abs().max(1.0));
    let (lo, hi) = match search_range {
        Some(r) => r,
        None => {
            let (cmin, cmax) = (crit.first().copied().unwrap_or(0.0), crit.last().copied().unwrap_or(0.0));
            let span = (cmax - cmin).max(cmax.abs().max(cmin.abs())).max(1e-3);
            ((cmin - 0.2 * span).min(-100.0), (cmax + 0.2 * span).max(100.0))
        }
    };
    if !(lo.is_finite() && hi.is_finite() && hi > lo) {
        return Err(Error::Domain(format!("search range ({lo}, {hi}) must be finite")));
    }
    let mut cuts = vec![lo];
    cuts.extend(crit.into_iter().filter(|&v| v > lo && v < hi));
    cuts.push(hi);
    let mut out = Vec::new();
    for c in cuts.windows(2) {
        let (a, b) = (c[0], c[1]);
        if b - a <= 1e-12 * a.abs().max(b.abs()).max(1.0) {
            continue;
        }
        let z = curve.roots(0.5 * (a + b), 0.0, w).len();
        out.push(KpInterval {
            lo: a,
            hi: b,
            z,
            required_z: required,
            admissible: z as i64 >= required,
            sufficiency: Sufficiency::NecessaryOnly,
            members: Vec::new(),
        });
    }
    Ok(out)
}

pub fn delay_admissible_intervals(
    plant: &QuasiPlant,
    l: u32,
    delta: Option<f64>,
    search_range: Option<(f64, f64)>,
) -> Result<Vec<KpInterval>> {
    Ok(delay_partition(plant, l, delta, search_range)?
        .into_iter()
        .filter(|c| c.admissible)
        .collect())
}

/// Smallest `ω` from which three consecutive kP-plot periods are within 5%
/// of `2π/L`.
fn settled_frequency(curve: &DelayCurve<'_>) -> Result<Option<f64>> {
    let l = curve.plant.l;
    let nominal = 2.0 * PI / l;
    let theta = |w: f64| -> Result<f64> { Ok(w * l + curve.amp_phase(w)?.1) };
    let next_period = |w: f64| -> Result<Option<f64>> {
        let target = theta(w)? + 2.0 * PI;
        let (mut a, mut b) = (w, w);
        for _ in 0..64 {
            b += nominal / 8.0;
            if theta(b)? >= target {
                break;
            }
            a = b;
        }
        if theta(b)? < target {
            return Ok(None);
        }
        while b - a > 1e-9 * b {
            let m = 0.5 * (a + b);
            if theta(m)? < target {
                a = m;
            } else {
                b = m;
            }
        }
        Ok(Some(b))
    };
    let cap = CUTOFF_CAP / l;
    let mut w = curve.step;
    while w < cap {
        let mut start = w;
        let mut ok = true;
        for _ in 0..3 {
            match next_period(start)? {
                Some(end) if ((end - start) - nominal).abs() <= 0.05 * nominal => start = end,
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            return Ok(Some(w));
        }
        w += nominal / 4.0;
    }
    Ok(None)
}

/// Heuristic cutoff beyond which boundaries no longer shape stable
/// polygons: the later of the settling frequency and the last extremum that
/// bounds an admissible interval, plus two half-periods.
pub fn relevant_frequency_range(plant: &QuasiPlant, kp: f64) -> Result<f64> {
    let _ = kp;
    let curve = DelayCurve::new(plant)?;
    let cap = CUTOFF_CAP / plant.l;
    let settled = settled_frequency(&curve)?.unwrap_or(cap);
    let mut bounding = 0.0_f64;
    if let Ok(delta) = choose_delta(plant, 1) {
        let w = window(plant, 1, delta);
        let cells = delay_admissible_intervals(plant, 1, Some(delta), None)?;
        for (we, v) in curve.extrema(0.0, w) {
            let hit = cells.iter().any(|c| {
                let tol = 1e-9 * v.abs().max(1.0);
                (c.lo - v).abs() <= tol || (c.hi - v).abs() <= tol
            });
            if hit {
                bounding = bounding.max(we);
            }
        }
    }
    // Singular frequencies settle to a spacing of π/L; keep two half-periods
    // of that pattern as margin.
    Ok((settled.max(bounding) + PI / plant.l).min(cap))
}

/// Outcome of the argument-principle count.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiCheck {
    /// Zeros in the closed right half-plane (`usize::MAX` for neutral loops
    /// outside the infinity-root boundaries).
    pub rhp_zeros: usize,
    /// `min |p(jω)|` relative to the size of its terms.
    pub margin: f64,
}

impl QuasiCheck {
    pub fn stable(&self) -> bool {
        self.rhp_zeros == 0
    }
}

fn abs_sum(p: &RealPoly, r: f64) -> f64 {
    p.coeffs().iter().rev().fold(0.0, |acc, c| acc * r + c.abs())
}

/// Accumulated argument change of `f` along a parametrised path, with
/// bisection wherever a sample step turns by more than π/8 or the halves
/// disagree.
fn arg_change(f: &impl Fn(f64) -> (Complex64, f64), a: f64, b: f64, samples: usize, margin: &mut f64) -> f64 {
    fn rec(
        f: &impl Fn(f64) -> (Complex64, f64),
        a: f64,
        fa: Complex64,
        b: f64,
        fb: Complex64,
        depth: u32,
        margin: &mut f64,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (fm, sm) = f(m);
        *margin = margin.min(fm.norm() / sm.max(1e-300));
        let d1 = (fm / fa).arg();
        let d2 = (fb / fm).arg();
        let whole = (fb / fa).arg();
        if depth >= 48 || (d1.abs() < PI / 8.0 && d2.abs() < PI / 8.0 && (d1 + d2 - whole).abs() < 1e-9) {
            return d1 + d2;
        }
        rec(f, a, fa, m, fm, depth + 1, margin) + rec(f, m, fm, b, fb, depth + 1, margin)
    }
    let mut total = 0.0;
    let (mut fa, sa) = f(a);
    *margin = margin.min(fa.norm() / sa.max(1e-300));
    for k in 1..=samples {
        let t0 = a + (b - a) * (k - 1) as f64 / samples as f64;
        let t1 = a + (b - a) * k as f64 / samples as f64;
        let (fb, sb) = f(t1);
        *margin = margin.min(fb.norm() / sb.max(1e-300));
        total += rec(f, t0, fa, t1, fb, 0, margin);
        fa = fb;
    }
    total
}

/// Right half-plane zero count of `A·Q·e^{-Ls} + B` (same zeros as the
/// closed loop) by the argument principle on a half-disc large enough that
/// `B` dominates outside it.
pub fn quasi_rhp_zeros(plant: &QuasiPlant, r: [f64; 3], omega_max: f64) -> Result<QuasiCheck> {
    let [ki, kd, kp] = r;
    let q = RealPoly::new(vec![ki, kp, kd]);
    let aq = &plant.a * &q;
    let b = &plant.b;
    let n = b.degree();
    let bn = b.leading().abs();
    let ratio_target = if plant.is_neutral() {
        let kappa = (kd * plant.a.leading() / plant.b.leading()).abs();
        if (kappa - 1.0).abs() <= 1e-9 {
            return Err(Error::Inconclusive { margin: 0.0 });
        }
        if kappa > 1.0 {
            return Ok(QuasiCheck {
                rhp_zeros: usize::MAX,
                margin: kappa - 1.0,
            });
        }
        0.5 * (1.0 + kappa)
    } else {
        0.5
    };
    let lower_b = |rad: f64| bn * rad.powi(n as i32) - abs_sum(&RealPoly::new(b.coeffs()[..n].to_vec()), rad);
    let mut rad = 1.0_f64;
    while !(lower_b(rad) > 0.0 && abs_sum(&aq, rad) <= ratio_target * lower_b(rad)) {
        rad *= 2.0;
        if rad > 1e12 {
            return Err(Error::Inconclusive { margin: 0.0 });
        }
    }
    // The bound must also hold further out, where B keeps dominating.
    while [2.0, 4.0, 8.0].iter().any(|k| !(abs_sum(&aq, k * rad) <= ratio_target * lower_b(k * rad))) {
        rad *= 2.0;
    }
    let omega = rad.max(omega_max);
    let l = plant.l;
    let eval = |s: Complex64| -> (Complex64, f64) {
        let t1 = aq.eval_complex(s) * (-s * l).exp();
        let t2 = b.eval_complex(s);
        (t1 + t2, t1.norm() + t2.norm())
    };
    let mut margin = f64::INFINITY;
    let per = ((omega * l / (PI / 8.0)).ceil() as usize).clamp(64, 1 << 22);
    let axis = arg_change(&|w| eval(Complex64::new(0.0, w)), 0.0, omega, per, &mut margin);
    if margin <= 1e-9 {
        return Err(Error::Inconclusive { margin });
    }
    // On the arc f = B·(1 + X) with |X| < 1, so the arc contributes the
    // turning of B around its zeros plus the endpoint change of arg(1 + X).
    let top = Complex64::new(0.0, omega);
    let w_top = eval(top).0 / b.eval_complex(top);
    let w_bottom = eval(top.conj()).0 / b.eval_complex(top.conj());
    if w_top.re <= 0.0 || w_bottom.re <= 0.0 {
        return Err(Error::Inconclusive { margin });
    }
    let semi: f64 = roots_or_empty(b)?
        .iter()
        .map(|z| ((top - z).arg() - (top.conj() - z).arg()).rem_euclid(2.0 * PI))
        .sum::<f64>()
        + (w_top.arg() - w_bottom.arg());
    let z = (semi - 2.0 * axis) / (2.0 * PI);
    if (z - z.round()).abs() > 0.05 || z.round() < 0.0 {
        return Err(Error::Inconclusive { margin });
    }
    Ok(QuasiCheck {
        rhp_zeros: z.round() as usize,
        margin,
    })
}

pub fn quasi_stability_check(plant: &QuasiPlant, ki: f64, kp: f64, kd: f64, omega_max: f64) -> Result<bool> {
    Ok(quasi_rhp_zeros(plant, [ki, kd, kp], omega_max)?.stable())
}

fn lines_box(lines: &[Line]) -> f64 {
    let mut far = 0.0_f64;
    for l in lines {
        for h in [l.h1, l.h2] {
            if h.abs() > 1e-12 * l.normal_norm() {
                far = far.max((l.h0 / h).abs());
            }
        }
    }
    for (i, a) in lines.iter().enumerate() {
        for b in &lines[i + 1..] {
            if let Some(p) = a.intersection(b) {
                far = far.max(p[0].abs()).max(p[1].abs());
            }
        }
    }
    (2.0 * far).max(1.0)
}

fn crosses(line: &Line, bbox: &BBox) -> bool {
    let corners = [
        [bbox.x_min, bbox.y_min],
        [bbox.x_max, bbox.y_min],
        [bbox.x_min, bbox.y_max],
        [bbox.x_max, bbox.y_max],
    ];
    let s: Vec<f64> = corners.iter().map(|&c| line.value(c)).collect();
    s.iter().any(|v| *v > 0.0) && s.iter().any(|v| *v < 0.0)
}

/// Delay slice at fixed `kp`; the plane is `(kI, kD)`.
pub fn delay_slice(plant: &QuasiPlant, kp: f64, omega_max: Option<f64>) -> Result<Slice> {
    let curve = DelayCurve::new(plant)?;
    let region = GammaRegion::hurwitz();
    let ch = characteristic(plant);
    let cutoff = relevant_frequency_range(plant, kp)?;
    let w_lines = omega_max.unwrap_or(cutoff);
    let cap = CUTOFF_CAP / plant.l;

    let mut omegas = vec![0.0];
    omegas.extend(curve.roots(kp, 0.0, w_lines));
    // Seed the box with the low-frequency lines, where the plant dynamics
    // (rather than the delay) shape the boundaries.
    let low = 2.0 * curve.root_scale.max(curve.step());
    let seed: Vec<Line> = omegas
        .iter()
        .enumerate()
        .filter(|&(i, &w)| i < 3 || w <= low)
        .map(|(_, w)| *w)
        .filter_map(|w| curve.line_coefficients(w))
        .map(|h| Line::new(h[0], h[1], h[2]))
        .collect();
    let mut half = lines_box(&seed);
    // Neutral loops: the plane is cut at kD = ±K by infinity root
    // boundaries, beyond which nothing is stable. Lines accumulate on them,
    // so the search for crossing lines stops slightly inside.
    let kd_bound = infinity_root_boundaries(plant).map(|(_, k)| k);

    for _ in 0..8 {
        let mut bbox = BBox::square(half);
        let mut search = bbox;
        if let Some(k) = kd_bound {
            bbox.y_min = bbox.y_min.max(-1.05 * k);
            bbox.y_max = bbox.y_max.min(1.05 * k);
            search.y_min = search.y_min.max(-0.98 * k);
            search.y_max = search.y_max.min(0.98 * k);
        }
        // Lines at ω have offset ±sqrt(α² - ω²kP²); find where none of
        // them can reach the box any more, then pick up the crossing ones.
        let reach = |w: f64| -> bool {
            let Ok((alpha, _)) = curve.amp_phase(w) else {
                return true;
            };
            let c = (alpha * alpha - w * w * kp * kp).max(0.0).sqrt();
            [c, -c].iter().any(|&h0| crosses(&Line::new(1.0, -w * w, h0), &search))
        };
        let mut end = w_lines.max(curve.step());
        while end < cap && (0..=64).any(|k| reach(end * (1.0 + 3.0 * k as f64 / 64.0))) {
            end *= 2.0;
        }
        let extra: Vec<f64> = curve
            .roots(kp, w_lines, end.min(cap))
            .into_iter()
            .filter(|&w| {
                curve
                    .line_coefficients(w)
                    .is_some_and(|h| crosses(&Line::new(h[0], h[1], h[2]), &search))
            })
            .collect();
        let mut all = omegas.clone();
        all.extend(extra);
        let mut frequencies = Vec::with_capacity(all.len());
        let mut lines = Vec::with_capacity(all.len());
        let mut diagnostics = Vec::new();
        for &w in &all {
            let f = frequency_at(w);
            frequencies.push(f);
            match curve.line_coefficients(w) {
                Some(h) => {
                    let (line, diag) = line_from_parts(&ch, &region, kp, f, h);
                    diagnostics.extend(diag);
                    lines.push(line);
                }
                None => diagnostics.push(crate::slicing::Diagnostic::SingularCancellation { param: w }),
            }
        }
        if let Some(k) = kd_bound {
            // Only finitely many of the lines piling up on kD = ±K are in
            // the set, so counts cannot be carried across faces; every face
            // is classified by its own check instead.
            for l in &mut lines {
                l.jump = None;
            }
            for sign in [1.0, -1.0] {
                lines.push(BoundaryLine {
                    h1: 0.0,
                    h2: 1.0,
                    h0: -sign * k,
                    kind: LineKind::InfinityRoot,
                    omega: None,
                    source: None,
                    // High-frequency roots follow the sign of kD.
                    e1: 0,
                    e2: sign as i8,
                    crossing_size: 0,
                    jump: None,
                });
            }
        }
        let slice = assemble(kp, frequencies, lines, diagnostics, bbox, |p| {
            let c = quasi_rhp_zeros(plant, [p[0], p[1], kp], 0.0)?;
            Ok(PointCheck {
                unstable: c.rhp_zeros.min(i64::MAX as usize / 4) as i64,
                clean: true,
                census: None,
            })
        })?;
        if slice.stable_faces().any(|f| f.truncated) {
            half *= 2.0;
            continue;
        }
        return Ok(slice);
    }
    Err(Error::Precondition("stable region keeps reaching the working box".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex7() -> QuasiPlant {
        QuasiPlant::new(
            RealPoly::new(vec![1.0, -2.0, 0.0, -7.0, -1.0]),
            RealPoly::new(vec![0.0, 24.0, 74.0, 109.0, 95.0, 46.0, 11.0, 1.0]),
            0.05,
        )
        .unwrap()
    }

    #[test]
    fn amp_phase_trivial() {
        let p = QuasiPlant::new(RealPoly::constant(1.0), RealPoly::new(vec![0.0, 0.0, 1.0]), 1.0).unwrap();
        let (a, phi) = amp_phase(&p, 2.0).unwrap();
        assert!((a - 4.0).abs() < 1e-12);
        assert!((phi.rem_euclid(2.0 * PI) - PI).abs() < 1e-12);
        let p = QuasiPlant::new(RealPoly::new(vec![2.0, 1.0]), RealPoly::new(vec![0.0, 1.0, 0.0, 1.0]), 1.0).unwrap();
        let c = DelayCurve::new(&p).unwrap();
        let mut prev = c.amp_phase(0.01).unwrap().1;
        for k in 2..400 {
            let w = 0.01 * k as f64;
            let (alpha, phi) = c.amp_phase(w).unwrap();
            let s = Complex64::new(0.0, w);
            let r = p.b.eval_complex(s) / p.a.eval_complex(s);
            assert!((Complex64::from_polar(alpha, phi) - r).norm() < 1e-9 * alpha.max(1.0));
            // Continuous except for the π jump where B crosses zero at ω = 1.
            let jump = (phi - prev).abs();
            assert!(jump < 0.1 || (w - 1.0).abs() < 0.015, "jump {jump} at {w}");
            prev = phi;
        }
    }

    #[test]
    fn example7_threshold() {
        let (thr, census) = delay_required_z(&ex7(), 1, PI).unwrap();
        assert_eq!(thr, 5);
        assert_eq!(census, ZCensus::Hurwitz { n: 7, m: 4, p: 1, j: 0, j0: 0 });
        for l in 1..4 {
            let a = delay_required_z(&ex7(), l, PI).unwrap().0;
            let b = delay_required_z(&ex7(), l + 1, PI).unwrap().0;
            assert_eq!(b - a, 2);
        }
    }

    #[test]
    fn example7_limit_at_zero() {
        let p = ex7();
        let c = DelayCurve::new(&p).unwrap();
        assert!((c.limit_at_zero().unwrap() + 24.0).abs() < 1e-12);
        assert!((c.kp(1e-5) + 24.0).abs() < 1e-3);
    }

    #[test]
    fn slope_matches_difference() {
        let p = ex7();
        let c = DelayCurve::new(&p).unwrap();
        for w in [0.3, 1.7, 12.0, 80.0] {
            let fd = (c.kp(w + 1e-6) - c.kp(w - 1e-6)) / 2e-6;
            assert!((fd - c.kp_slope(w)).abs() <= 1e-5 * fd.abs().max(1.0));
        }
    }

    #[test]
    fn neutral_boundaries() {
        let p = QuasiPlant::new(RealPoly::constant(1.0), RealPoly::new(vec![1.0, 0.0, 1.0]), 1.0).unwrap();
        assert_eq!(infinity_root_boundaries(&p), Some((-1.0, 1.0)));
        assert_eq!(infinity_root_boundaries(&ex7()), None);
    }

    #[test]
    fn argument_principle_matches_polynomial_count() {
        // Tiny delay behaves like the delay-free loop for a well-damped case.
        let p = QuasiPlant::new(RealPoly::constant(1.0), RealPoly::new(vec![0.0, 1.0, 3.0, 1.0]), 1e-6).unwrap();
        let c = quasi_rhp_zeros(&p, [1.0, 0.0, 2.0], 0.0).unwrap();
        assert_eq!(c.rhp_zeros, 0);
        let c = quasi_rhp_zeros(&p, [-1.0, 0.0, 2.0], 0.0).unwrap();
        assert_eq!(c.rhp_zeros, 1);
    }
}
