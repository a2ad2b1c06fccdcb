//! Dense real polynomials, complex evaluation, root finding and root
//! censuses relative to a stability region.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gamma_region::GammaRegion;

/// Coefficients below this fraction of the largest one are dropped from the
/// top end before the degree is read off.
pub const NORMALIZE_REL: f64 = 1e-12;

/// Relative distance under which roots are merged into one multiple root.
pub const CLUSTER_REL: f64 = 1e-6;

/// Real polynomial with ascending coefficients (`coeffs[k]` multiplies `x^k`).
///
/// The zero polynomial has no stored coefficients.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "Vec<f64>", into = "Vec<f64>")]
pub struct RealPoly {
    coeffs: Vec<f64>,
}

impl From<Vec<f64>> for RealPoly {
    fn from(v: Vec<f64>) -> Self {
        RealPoly::new(v)
    }
}

impl From<RealPoly> for Vec<f64> {
    fn from(p: RealPoly) -> Self {
        p.coeffs
    }
}

impl RealPoly {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        let max = coeffs.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
        if max == 0.0 || !max.is_finite() {
            if max == 0.0 {
                coeffs.clear();
            }
            return RealPoly { coeffs };
        }
        while let Some(&last) = coeffs.last() {
            if last.abs() < NORMALIZE_REL * max {
                coeffs.pop();
            } else {
                break;
            }
        }
        RealPoly { coeffs }
    }

    pub fn zero() -> Self {
        RealPoly { coeffs: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        RealPoly::new(vec![c])
    }

    /// `c·x^k`.
    pub fn monomial(c: f64, k: usize) -> Self {
        let mut v = vec![0.0; k + 1];
        v[k] = c;
        RealPoly::new(v)
    }

    /// Monic polynomial with the given real roots.
    pub fn from_roots(roots: &[f64]) -> Self {
        roots.iter().fold(RealPoly::constant(1.0), |acc, &r| {
            &acc * &RealPoly::new(vec![-r, 1.0])
        })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree; 0 for constants and for the zero polynomial (check
    /// [`RealPoly::is_zero`] to tell them apart).
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn leading(&self) -> f64 {
        self.coeffs.last().copied().unwrap_or(0.0)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn eval_complex(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    /// Value and first derivative at `z` in one Horner pass.
    pub fn eval_with_derivative(&self, z: Complex64) -> (Complex64, Complex64) {
        let mut p = Complex64::new(0.0, 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    }

    pub fn derivative(&self) -> RealPoly {
        if self.coeffs.len() <= 1 {
            return RealPoly::zero();
        }
        RealPoly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| k as f64 * c)
                .collect(),
        )
    }

    pub fn scale(&self, s: f64) -> RealPoly {
        RealPoly::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    /// `p(x + sigma)`.
    pub fn shift(&self, sigma: f64) -> RealPoly {
        if sigma == 0.0 {
            return self.clone();
        }
        // Repeated synthetic division (Taylor expansion about sigma).
        let mut c = self.coeffs.clone();
        let n = c.len();
        for i in 0..n {
            for j in (i..n.saturating_sub(1)).rev() {
                c[j] += sigma * c[j + 1];
            }
        }
        RealPoly::new(c)
    }

    /// Polynomial long division: `self = q·d + r` with `deg r < deg d`.
    pub fn div_rem(&self, d: &RealPoly) -> Result<(RealPoly, RealPoly)> {
        if d.is_zero() {
            return Err(Error::Degree("division by the zero polynomial".into()));
        }
        if self.coeffs.len() < d.coeffs.len() {
            return Ok((RealPoly::zero(), self.clone()));
        }
        let mut r = self.coeffs.clone();
        let dn = d.coeffs.len() - 1;
        let lead = d.leading();
        let mut q = vec![0.0; r.len() - dn];
        for k in (0..q.len()).rev() {
            let f = r[k + dn] / lead;
            q[k] = f;
            for (i, &dc) in d.coeffs.iter().enumerate() {
                r[k + i] -= f * dc;
            }
            r[k + dn] = 0.0;
        }
        r.truncate(dn);
        Ok((RealPoly::new(q), RealPoly::new(r)))
    }

    /// Real and imaginary parts of `p(jω)` as real polynomials in `ω`.
    pub fn on_imaginary_axis(&self) -> (RealPoly, RealPoly) {
        let mut re = vec![0.0; self.coeffs.len()];
        let mut im = vec![0.0; self.coeffs.len()];
        for (k, &c) in self.coeffs.iter().enumerate() {
            match k % 4 {
                0 => re[k] = c,
                1 => im[k] = c,
                2 => re[k] = -c,
                _ => im[k] = -c,
            }
        }
        (RealPoly::new(re), RealPoly::new(im))
    }

    /// All complex roots, conjugate-paired.
    pub fn roots(&self) -> Result<Vec<Complex64>> {
        if self.is_zero() {
            return Err(Error::Degree("roots of the zero polynomial".into()));
        }
        let n = self.degree();
        if n == 0 {
            return Err(Error::Degree("roots of a constant polynomial".into()));
        }
        let k0 = self.coeffs.iter().position(|&c| c != 0.0).unwrap_or(0);
        let mut out = vec![Complex64::new(0.0, 0.0); k0];
        out.extend(roots_nonzero_constant(&self.coeffs[k0..])?);
        Ok(out)
    }

    /// Residual bound used by the root-finder accuracy contract.
    pub fn residual_bound(&self, r: Complex64, tol: f64) -> f64 {
        tol * self.max_abs_coeff() * r.norm().max(1.0).powi(self.degree() as i32)
    }
}

fn roots_nonzero_constant(c: &[f64]) -> Result<Vec<Complex64>> {
    let d = c.len() - 1;
    match d {
        0 => Ok(Vec::new()),
        1 => Ok(vec![Complex64::new(-c[0] / c[1], 0.0)]),
        2 => Ok(quadratic_roots(c[2], c[1], c[0])),
        _ => aberth_roots(c),
    }
}

fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<Complex64> {
    let disc = b * b - 4.0 * a * c;
    if disc >= 0.0 {
        let sgn = if b < 0.0 { -1.0 } else { 1.0 };
        let q = -0.5 * (b + sgn * disc.sqrt());
        if q == 0.0 {
            return vec![Complex64::new(0.0, 0.0); 2];
        }
        let r1 = q / a;
        let r2 = c / q;
        let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        vec![Complex64::new(lo, 0.0), Complex64::new(hi, 0.0)]
    } else {
        let re = -b / (2.0 * a);
        let im = (-disc).sqrt() / (2.0 * a.abs());
        vec![Complex64::new(re, im), Complex64::new(re, -im)]
    }
}

/// Aberth-Ehrlich simultaneous iteration started from the Newton polygon
/// radii, followed by conjugate pairing and a Newton polish.
fn aberth_roots(c: &[f64]) -> Result<Vec<Complex64>> {
    let d = c.len() - 1;
    let poly = RealPoly { coeffs: c.to_vec() };
    let abs_poly = RealPoly {
        coeffs: c.iter().map(|x| x.abs()).collect(),
    };
    let mut z = initial_guesses(c);
    let mut done = vec![false; d];
    for _ in 0..1000 {
        let mut all = true;
        for i in 0..d {
            if done[i] {
                continue;
            }
            let (p, dp) = poly.eval_with_derivative(z[i]);
            let bound = abs_poly.eval(z[i].norm());
            if p.norm() <= 4.0 * f64::EPSILON * bound {
                done[i] = true;
                continue;
            }
            all = false;
            let ratio = p / dp;
            let sum: Complex64 = (0..d)
                .filter(|&j| j != i)
                .map(|j| (z[i] - z[j]).inv())
                .sum();
            let w = ratio / (1.0 - ratio * sum);
            if !w.re.is_finite() || !w.im.is_finite() {
                continue;
            }
            z[i] -= w;
            if w.norm() <= f64::EPSILON * z[i].norm() {
                done[i] = true;
            }
        }
        if all {
            break;
        }
    }
    if z.iter().any(|r| !r.re.is_finite() || !r.im.is_finite()) {
        return Err(Error::NoConvergence(d));
    }
    Ok(pair_conjugates(z)
        .into_iter()
        .flat_map(|r| match r {
            Paired::Pair(r) => {
                let r = polish(&poly, r);
                vec![r, r.conj()]
            }
            Paired::Real(x) => vec![Complex64::new(polish(&poly, Complex64::new(x, 0.0)).re, 0.0)],
            Paired::Single(r) => vec![polish(&poly, r)],
        })
        .collect())
}

fn initial_guesses(c: &[f64]) -> Vec<Complex64> {
    let d = c.len() - 1;
    // Upper convex hull of (k, log|c_k|).
    let pts: Vec<(f64, f64)> = c
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(k, v)| (k as f64, v.abs().ln()))
        .collect();
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for &p in &pts {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    let mut out = Vec::with_capacity(d);
    for w in hull.windows(2) {
        let (i, j) = (w[0].0 as usize, w[1].0 as usize);
        let k = j - i;
        let u = ((w[0].1 - w[1].1) / k as f64).exp();
        for q in 0..k {
            let theta = 2.0 * std::f64::consts::PI * (q as f64 / k as f64 + i as f64 / d as f64) + 0.4;
            out.push(Complex64::from_polar(u, theta));
        }
    }
    out
}

/// Make the root set exactly closed under conjugation by matching upper
/// and lower half-plane approximations, closest pairs first.
#[derive(Clone, Copy, Debug)]
enum Paired {
    Real(f64),
    Pair(Complex64),
    Single(Complex64),
}

fn pair_conjugates(z: Vec<Complex64>) -> Vec<Paired> {
    let is_real = |w: Complex64| w.im.abs() <= 1e-14 * w.norm().max(1.0);
    let upper: Vec<usize> = (0..z.len()).filter(|&i| !is_real(z[i]) && z[i].im > 0.0).collect();
    let lower: Vec<usize> = (0..z.len()).filter(|&i| !is_real(z[i]) && z[i].im < 0.0).collect();
    let mut cand: Vec<(f64, usize, usize)> = Vec::new();
    for &i in &upper {
        for &j in &lower {
            let d = (z[i] - z[j].conj()).norm();
            if d <= 1e-3 * z[i].norm().max(1.0).max(z[i].im.abs()) {
                cand.push((d, i, j));
            }
        }
    }
    cand.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut used = vec![false; z.len()];
    let mut out = Vec::new();
    for (_, i, j) in cand {
        if used[i] || used[j] {
            continue;
        }
        used[i] = true;
        used[j] = true;
        let m = (z[i] + z[j].conj()) * 0.5;
        out.push(Paired::Pair(Complex64::new(m.re, m.im.abs())));
    }
    for (i, &w) in z.iter().enumerate() {
        if used[i] {
            continue;
        }
        out.push(if is_real(w) { Paired::Real(w.re) } else { Paired::Single(w) });
    }
    out
}

fn polish(p: &RealPoly, mut z: Complex64) -> Complex64 {
    let (mut v, _) = p.eval_with_derivative(z);
    let abs_poly = RealPoly {
        coeffs: p.coeffs.iter().map(|x| x.abs()).collect(),
    };
    for _ in 0..8 {
        if v.norm() <= 4.0 * f64::EPSILON * abs_poly.eval(z.norm()) {
            break;
        }
        let (_, dv) = p.eval_with_derivative(z);
        if dv.norm() == 0.0 {
            break;
        }
        let step = v / dv;
        let cand = z - step;
        let cv = p.eval_complex(cand);
        if cv.norm() < v.norm() {
            z = cand;
            v = cv;
        } else {
            break;
        }
        if step.norm() <= 1e-16 * z.norm().max(1.0) {
            break;
        }
    }
    z
}

impl Neg for &RealPoly {
    type Output = RealPoly;
    fn neg(self) -> RealPoly {
        self.scale(-1.0)
    }
}

impl Add for &RealPoly {
    type Output = RealPoly;
    fn add(self, rhs: &RealPoly) -> RealPoly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        RealPoly::new((0..n).map(|k| self.coeff(k) + rhs.coeff(k)).collect())
    }
}

impl Sub for &RealPoly {
    type Output = RealPoly;
    fn sub(self, rhs: &RealPoly) -> RealPoly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        RealPoly::new((0..n).map(|k| self.coeff(k) - rhs.coeff(k)).collect())
    }
}

impl Mul for &RealPoly {
    type Output = RealPoly;
    fn mul(self, rhs: &RealPoly) -> RealPoly {
        if self.is_zero() || rhs.is_zero() {
            return RealPoly::zero();
        }
        let mut out = vec![0.0; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        RealPoly::new(out)
    }
}

impl fmt::Display for RealPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, &c) in self.coeffs.iter().enumerate().rev() {
            if c == 0.0 {
                continue;
            }
            if !first {
                write!(f, " {} ", if c < 0.0 { '-' } else { '+' })?;
            } else if c < 0.0 {
                write!(f, "-")?;
            }
            first = false;
            let a = c.abs();
            match k {
                0 => write!(f, "{a}")?,
                1 => write!(f, "{a}·x")?,
                _ => write!(f, "{a}·x^{k}")?,
            }
        }
        Ok(())
    }
}

/// Group roots lying within `rel_tol·max(1, |r|)` of each other.
pub fn cluster_roots(roots: &[Complex64], rel_tol: f64) -> Vec<(Complex64, usize)> {
    let mut clusters: Vec<(Complex64, usize)> = Vec::new();
    for &r in roots {
        let hit = clusters.iter_mut().find(|(c, _)| (*c - r).norm() <= rel_tol * c.norm().max(1.0));
        match hit {
            Some((c, k)) => {
                *c = (*c * (*k as f64) + r) / (*k as f64 + 1.0);
                *k += 1;
            }
            None => clusters.push((r, 1)),
        }
    }
    for (c, k) in clusters.iter_mut() {
        if *k > 1 && c.im.abs() <= rel_tol * c.norm().max(1.0) {
            c.im = 0.0;
        }
    }
    clusters
}

/// A root of multiplicity `k` is a simple root of the `(k-1)`-th derivative;
/// Newton on that derivative recovers the centre far more accurately than
/// the mean of the perturbed copies.
fn refine_multiple(p: &RealPoly, center: Complex64, k: usize) -> Complex64 {
    if k < 2 {
        return center;
    }
    let q = (1..k).fold(p.clone(), |acc, _| acc.derivative());
    let mut z = center;
    for _ in 0..20 {
        let (v, dv) = q.eval_with_derivative(z);
        if dv.norm() == 0.0 {
            break;
        }
        let step = v / dv;
        z -= step;
        if step.norm() <= 1e-15 * z.norm().max(1.0) {
            break;
        }
    }
    if (z - center).norm() <= CLUSTER_REL * center.norm().max(1.0) {
        if center.im == 0.0 {
            z.im = 0.0;
        }
        z
    } else {
        center
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CensusRoot {
    pub value: Complex64,
    pub multiplicity: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RootCensus {
    pub inside: usize,
    pub on_boundary: usize,
    pub outside: usize,
    pub roots: Vec<CensusRoot>,
}

impl RootCensus {
    pub fn total(&self) -> usize {
        self.inside + self.on_boundary + self.outside
    }

    /// True when the census polynomial has all `n` roots strictly inside.
    pub fn all_inside(&self, n: usize) -> bool {
        self.inside == n && self.on_boundary == 0 && self.outside == 0
    }

    /// Multiplicity of the root at `z` (0 if absent).
    pub fn order_at(&self, z: Complex64, tol: f64) -> usize {
        self.roots
            .iter()
            .filter(|r| (r.value - z).norm() <= tol)
            .map(|r| r.multiplicity)
            .sum()
    }
}

pub const DEFAULT_BOUNDARY_TOL: f64 = 1e-9;

pub fn root_census(p: &RealPoly, region: &GammaRegion, boundary_tol: f64) -> Result<RootCensus> {
    if p.is_zero() {
        return Err(Error::Degree("census of the zero polynomial".into()));
    }
    let roots = if p.degree() == 0 { Vec::new() } else { p.roots()? };
    let clusters: Vec<(Complex64, usize)> = cluster_roots(&roots, CLUSTER_REL)
        .into_iter()
        .map(|(c, k)| (refine_multiple(p, c, k), k))
        .collect();
    let mut census = RootCensus {
        inside: 0,
        on_boundary: 0,
        outside: 0,
        roots: Vec::with_capacity(clusters.len()),
    };
    for (value, multiplicity) in clusters {
        let d = region.signed_distance(value);
        if d.abs() <= boundary_tol {
            census.on_boundary += multiplicity;
        } else if d < 0.0 {
            census.inside += multiplicity;
        } else {
            census.outside += multiplicity;
        }
        census.roots.push(CensusRoot { value, multiplicity });
    }
    Ok(census)
}
