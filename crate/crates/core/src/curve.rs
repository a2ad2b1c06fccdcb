//! The singular-frequency curve `r3(x) = num(x) / den(x)`.
//!
//! For the half-plane `x = ω` is the distance along the (shifted) imaginary
//! axis; for circles `x = tan(α/2)` with `z = m + ρ e^{jα}`. Both cases end up
//! as a ratio of real polynomials, so root counting and extremum search are
//! polynomial problems. The real-axis boundary points (`ω = 0`, `α = 0`,
//! `α = π`) are not on the curve and are handled by the callers.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gamma_region::GammaRegion;
use crate::plant::PlantModel;
use crate::polynomial::{cluster_roots, RealPoly, CLUSTER_REL};

const REAL_ROOT_REL: f64 = 1e-6;
const POLE_REL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct SingularCurve {
    pub region: GammaRegion,
    pub num: RealPoly,
    pub den: RealPoly,
}

/// Positive solutions of `r3(x) = r3`, split into genuine singular points and
/// cancellations where `A·E` vanishes on the boundary.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CurveSolution {
    pub xs: Vec<f64>,
    pub cancellations: Vec<f64>,
}

type CPoly = Vec<Complex64>;

fn cmul(a: &[Complex64], b: &[Complex64]) -> CPoly {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![Complex64::new(0.0, 0.0); a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn cpow(a: &[Complex64], k: usize) -> CPoly {
    (0..k).fold(vec![Complex64::new(1.0, 0.0)], |acc, _| cmul(&acc, a))
}

/// `c(z(t))·(1+t²)^deg c` for `z(t) = m + ρ e^{jα}`, `t = tan(α/2)`.
fn circle_substitute(c: &RealPoly, m: f64, rho: f64) -> CPoly {
    let d = c.degree();
    let u = [
        Complex64::new(m + rho, 0.0),
        Complex64::new(0.0, 2.0 * rho),
        Complex64::new(m - rho, 0.0),
    ];
    let w = [
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(1.0, 0.0),
    ];
    let mut out = vec![Complex64::new(0.0, 0.0); 2 * d + 1];
    for (k, &a) in c.coeffs().iter().enumerate() {
        if a == 0.0 {
            continue;
        }
        let term = cmul(&cpow(&u, k), &cpow(&w, d - k));
        for (i, t) in term.iter().enumerate() {
            out[i] += a * t;
        }
    }
    out
}

fn real_pow_1pt2(k: usize) -> RealPoly {
    let w = RealPoly::new(vec![1.0, 0.0, 1.0]);
    (0..k).fold(RealPoly::constant(1.0), |acc, _| &acc * &w)
}

impl SingularCurve {
    pub fn new(plant: &PlantModel, region: &GammaRegion) -> Result<Self> {
        if plant.a.is_zero() {
            return Err(Error::Degree("A must be nonzero".into()));
        }
        let (num, den) = match *region {
            GammaRegion::Hurwitz { sigma0 } => {
                let a = plant.a.shift(sigma0);
                let b = plant.b.shift(sigma0);
                let (ra, ia) = a.on_imaginary_axis();
                let (rb, ib) = b.on_imaginary_axis();
                let im = &(&ib * &ra) - &(&rb * &ia);
                // Im(B·conj A) is odd in ω; divide by ω exactly.
                let num = RealPoly::new(im.coeffs().iter().skip(1).map(|c| -c).collect());
                let den = &(&ra * &ra) + &(&ia * &ia);
                (num, den)
            }
            GammaRegion::Circle { m, rho } => {
                let na = plant.a.degree();
                let at = circle_substitute(&plant.a, m, rho);
                let abs_a = cmul(&at, &at.iter().map(|c| c.conj()).collect::<Vec<_>>());
                let abs_a = RealPoly::new(abs_a.iter().map(|c| c.re).collect());
                if plant.b.is_zero() {
                    (RealPoly::zero(), &RealPoly::new(vec![0.0, 2.0]) * &abs_a)
                } else {
                    let nb = plant.b.degree();
                    let bt = circle_substitute(&plant.b, m, rho);
                    let one_minus_jt = [
                        Complex64::new(1.0, 0.0),
                        Complex64::new(0.0, -2.0),
                        Complex64::new(-1.0, 0.0),
                    ];
                    let prod = cmul(
                        &cmul(&bt, &at.iter().map(|c| c.conj()).collect::<Vec<_>>()),
                        &one_minus_jt,
                    );
                    // The imaginary part vanishes at t = 0; cancel one t.
                    let num = RealPoly::new(prod.iter().skip(1).map(|c| c.im).collect());
                    let num = &num * &real_pow_1pt2(na.saturating_sub(nb));
                    let den = &abs_a.scale(2.0) * &real_pow_1pt2(nb.saturating_sub(na));
                    (num, den)
                }
            }
        };
        Ok(SingularCurve {
            region: *region,
            num,
            den,
        })
    }

    pub fn r3_at(&self, x: f64) -> f64 {
        self.num.eval(x) / self.den.eval(x)
    }

    /// `dr3/dx`.
    pub fn slope_at(&self, x: f64) -> f64 {
        let n = self.num.eval(x);
        let d = self.den.eval(x);
        (self.num.derivative().eval(x) * d - n * self.den.derivative().eval(x)) / (d * d)
    }

    /// Boundary parameter (`ω` or `α`) of a curve abscissa.
    pub fn param_of(&self, x: f64) -> f64 {
        match self.region {
            GammaRegion::Hurwitz { .. } => x,
            GammaRegion::Circle { .. } => 2.0 * x.atan(),
        }
    }

    pub fn x_of(&self, param: f64) -> f64 {
        match self.region {
            GammaRegion::Hurwitz { .. } => param,
            GammaRegion::Circle { .. } => (param / 2.0).tan(),
        }
    }

    pub fn point(&self, x: f64) -> Complex64 {
        self.region.boundary_point(self.param_of(x))
    }

    fn is_pole(&self, x: f64) -> bool {
        let scale = self.den.max_abs_coeff() * x.abs().max(1.0).powi(self.den.degree() as i32);
        self.den.eval(x).abs() <= POLE_REL * scale
    }

    fn positive_real_roots(p: &RealPoly) -> Result<Vec<f64>> {
        if p.is_zero() || p.degree() == 0 {
            return Ok(Vec::new());
        }
        let roots: Vec<Complex64> = p
            .roots()?
            .into_iter()
            .filter(|z| z.im.abs() <= REAL_ROOT_REL * z.re.abs().max(1.0))
            .map(|z| Complex64::new(z.re, 0.0))
            .collect();
        let mut xs: Vec<f64> = cluster_roots(&roots, CLUSTER_REL)
            .into_iter()
            .map(|(z, _)| z.re)
            .filter(|&x| x > 1e-10)
            .collect();
        xs.sort_by(|a, b| a.total_cmp(b));
        Ok(xs)
    }

    /// Positive solutions of `r3(x) = r3`.
    pub fn solve(&self, r3: f64) -> Result<CurveSolution> {
        let g = &self.num - &self.den.scale(r3);
        if g.is_zero() {
            return Err(Error::DegenerateSlice { r3 });
        }
        let mut sol = CurveSolution::default();
        for x in Self::positive_real_roots(&g)? {
            if self.is_pole(x) {
                sol.cancellations.push(x);
            } else {
                sol.xs.push(x);
            }
        }
        Ok(sol)
    }

    /// Number of distinct positive singular points at `r3`.
    pub fn count(&self, r3: f64) -> Result<usize> {
        Ok(self.solve(r3)?.xs.len())
    }

    /// Local extrema `(x, r3)` of the curve for `x > 0`.
    pub fn extrema(&self) -> Result<Vec<(f64, f64)>> {
        let d = &(&self.num.derivative() * &self.den) - &(&self.num * &self.den.derivative());
        let mut out = Vec::new();
        for x in Self::positive_real_roots(&d)? {
            if self.is_pole(x) {
                continue;
            }
            // Keep sign changes of the slope only; inflection points with a
            // double root of d are not extrema.
            let h = 1e-5 * x.max(1e-3);
            let s1 = d.eval(x - h);
            let s2 = d.eval(x + h);
            if s1 * s2 < 0.0 || s1 == 0.0 || s2 == 0.0 {
                out.push((x, self.r3_at(x)));
            }
        }
        Ok(out)
    }

    fn limit(num: &RealPoly, den: &RealPoly, at_zero: bool) -> Option<f64> {
        if num.is_zero() {
            return Some(0.0);
        }
        if den.is_zero() {
            return None;
        }
        let idx = |p: &RealPoly| -> usize {
            let tol = 1e-12 * p.max_abs_coeff();
            if at_zero {
                p.coeffs().iter().position(|c| c.abs() > tol).unwrap_or(0)
            } else {
                p.degree()
            }
        };
        let (kn, kd) = (idx(num), idx(den));
        let ratio = num.coeff(kn) / den.coeff(kd);
        match (at_zero, kn.cmp(&kd)) {
            (_, std::cmp::Ordering::Equal) => Some(ratio),
            (true, std::cmp::Ordering::Greater) | (false, std::cmp::Ordering::Less) => Some(0.0),
            _ => None,
        }
    }

    /// `lim r3(x)` as `x → 0⁺`; `None` when infinite.
    pub fn limit_at_zero(&self) -> Option<f64> {
        Self::limit(&self.num, &self.den, true)
    }

    /// `lim r3(x)` as `x → ∞`; `None` when infinite.
    pub fn limit_at_infinity(&self) -> Option<f64> {
        Self::limit(&self.num, &self.den, false)
    }

    /// Curve values where the count of positive solutions can change.
    pub fn critical_values(&self) -> Result<Vec<f64>> {
        let mut v: Vec<f64> = self.extrema()?.into_iter().map(|(_, r)| r).collect();
        v.extend(self.limit_at_zero());
        v.extend(self.limit_at_infinity());
        v.retain(|x| x.is_finite());
        v.sort_by(|a, b| a.total_cmp(b));
        v.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * a.abs().max(1.0));
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn ex2() -> PlantModel {
        PlantModel::continuous(
            vec![1.0, -2.0, 0.0, -7.0, -0.5],
            vec![0.0, 24.0, 74.0, 109.0, 95.0, 46.0, 11.0, 1.0],
        )
        .unwrap()
    }

    #[test]
    fn hurwitz_curve_matches_direct_formula() {
        let p = ex2();
        let c = SingularCurve::new(&p, &GammaRegion::hurwitz()).unwrap();
        for w in [0.1, 0.5, 1.3, 4.0] {
            let s = Complex64::new(0.0, w);
            let direct = -(p.b.eval_complex(s) / p.a.eval_complex(s)).im / w;
            assert!((c.r3_at(w) - direct).abs() < 1e-10 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn shifted_hurwitz_curve_uses_shifted_axis() {
        let p = ex2();
        let region = GammaRegion::shifted_hurwitz(-0.2).unwrap();
        let c = SingularCurve::new(&p, &region).unwrap();
        for w in [0.3, 2.0] {
            let s = Complex64::new(-0.2, w);
            let direct = -(p.b.eval_complex(s) / p.a.eval_complex(s)).im / w;
            assert!((c.r3_at(w) - direct).abs() < 1e-10 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn circle_curve_matches_direct_formula() {
        let p = PlantModel::discrete(vec![0.3, -1.2, 1.0], vec![0.0, 0.1, 0.4, -0.2, 1.0]).unwrap();
        for (m, rho) in [(0.0, 1.0), (0.4, 0.5), (-1.0, 2.0)] {
            let region = GammaRegion::circle(m, rho).unwrap();
            let c = SingularCurve::new(&p, &region).unwrap();
            for alpha in [0.2, 1.0, 2.5, 3.0] {
                let z = region.boundary_point(alpha);
                let e = Complex64::from_polar(1.0, -alpha);
                let direct = (p.b.eval_complex(z) * e / p.a.eval_complex(z)).im / alpha.sin();
                let x = c.x_of(alpha);
                assert!((c.r3_at(x) - direct).abs() < 1e-9 * direct.abs().max(1.0), "{m} {rho} {alpha}");
                assert!((c.param_of(x) - alpha).abs() < 1e-14);
            }
        }
        let _ = PI;
    }

    #[test]
    fn example2_frequencies_at_minus_two() {
        let c = SingularCurve::new(&ex2(), &GammaRegion::hurwitz()).unwrap();
        let sol = c.solve(-2.0).unwrap();
        let expect = [0.352973, 0.663758, 0.774175, 3.347272];
        assert_eq!(sol.xs.len(), 4);
        for (x, e) in sol.xs.iter().zip(expect) {
            assert!((x - e).abs() < 1e-5);
        }
        assert_eq!(c.count(5.0).unwrap(), 2);
    }

    #[test]
    fn example2_critical_values() {
        let c = SingularCurve::new(&ex2(), &GammaRegion::hurwitz()).unwrap();
        let v = c.critical_values().unwrap();
        let expect = [-24.0, -2.761353, 3.766417, 6.156511];
        assert_eq!(v.len(), expect.len(), "{v:?}");
        for (x, e) in v.iter().zip(expect) {
            assert!((x - e).abs() < 1e-5, "{v:?}");
        }
    }

    #[test]
    fn constant_curve_is_degenerate_at_its_value() {
        let p = PlantModel::continuous(vec![1.0], vec![0.0, 1.0]).unwrap();
        let c = SingularCurve::new(&p, &GammaRegion::hurwitz()).unwrap();
        assert!((c.r3_at(2.0) + 1.0).abs() < 1e-15);
        assert!(matches!(c.solve(-1.0), Err(Error::DegenerateSlice { .. })));
        assert_eq!(c.count(-2.0).unwrap(), 0);
    }

    #[test]
    fn limits() {
        let c = SingularCurve::new(&ex2(), &GammaRegion::hurwitz()).unwrap();
        assert!((c.limit_at_zero().unwrap() + 24.0).abs() < 1e-12);
    }
}
