//! Stability regions and the controller parameterisation attached to them.
//!
//! Every closed-loop polynomial in this crate has the form
//! `p(z) = A(z)·(δ1(z) r1 + δ2(z) r2 + δ3(z) r3) + B(z)`, where the basis
//! `(δ1, δ2, δ3)` is chosen per region so that on the region boundary the
//! parameters `r1, r2` only enter the real part of `p / (A·E)`. The swept
//! scalar is always `r3`; downstream modules never look at the region kind
//! to decide which parameter is which.
//!
//! For the Hurwitz case the roles are `(r1, r2, r3) = (kI, kD, kP)`.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polynomial::RealPoly;

/// Region whose interior must contain every closed-loop eigenvalue.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GammaRegion {
    /// Open half-plane `Re z < sigma0`.
    Hurwitz { sigma0: f64 },
    /// Open disc `|z - m| < rho`.
    Circle { m: f64, rho: f64 },
}

impl GammaRegion {
    pub const fn hurwitz() -> Self {
        GammaRegion::Hurwitz { sigma0: 0.0 }
    }

    pub const fn schur() -> Self {
        GammaRegion::Circle { m: 0.0, rho: 1.0 }
    }

    pub fn shifted_hurwitz(sigma0: f64) -> Result<Self> {
        if !sigma0.is_finite() {
            return Err(Error::Domain(format!("sigma0 must be finite, got {sigma0}")));
        }
        Ok(GammaRegion::Hurwitz { sigma0 })
    }

    pub fn circle(m: f64, rho: f64) -> Result<Self> {
        if !(rho > 0.0) || !m.is_finite() || !rho.is_finite() {
            return Err(Error::Domain(format!(
                "circle needs a finite centre and rho > 0, got m = {m}, rho = {rho}"
            )));
        }
        Ok(GammaRegion::Circle { m, rho })
    }

    pub fn is_hurwitz(&self) -> bool {
        matches!(self, GammaRegion::Hurwitz { .. })
    }

    /// Negative inside, zero on the boundary, positive outside.
    pub fn signed_distance(&self, z: Complex64) -> f64 {
        match *self {
            GammaRegion::Hurwitz { sigma0 } => z.re - sigma0,
            GammaRegion::Circle { m, rho } => (z - m).norm() - rho,
        }
    }

    /// Boundary point for a boundary parameter: `ω` on the shifted
    /// imaginary axis, `α` on the circle.
    pub fn boundary_point(&self, param: f64) -> Complex64 {
        match *self {
            GammaRegion::Hurwitz { sigma0 } => Complex64::new(sigma0, param),
            GammaRegion::Circle { m, rho } => m + Complex64::from_polar(rho, param),
        }
    }

    /// Unit outward normal at a boundary point.
    pub fn outward_normal(&self, z: Complex64) -> Complex64 {
        match *self {
            GammaRegion::Hurwitz { .. } => Complex64::new(1.0, 0.0),
            GammaRegion::Circle { m, .. } => {
                let w = z - m;
                w / w.norm()
            }
        }
    }

    /// Parameters of the boundary points on the real axis, with the points.
    pub fn real_axis_points(&self) -> Vec<(f64, f64)> {
        match *self {
            GammaRegion::Hurwitz { sigma0 } => vec![(0.0, sigma0)],
            GammaRegion::Circle { m, rho } => vec![(0.0, m + rho), (PI, m - rho)],
        }
    }

    /// The decoupling function used when forming `F = p / (A·E)` on the
    /// boundary: 1 for the half-plane, `z - m` for circles.
    pub fn line_decoupler(&self, z: Complex64) -> Complex64 {
        match *self {
            GammaRegion::Hurwitz { .. } => Complex64::new(1.0, 0.0),
            GammaRegion::Circle { m, .. } => z - m,
        }
    }

    /// Map `r = (r1, r2, r3)` to PID gains. Only meaningful for Hurwitz
    /// regions, where `Q = kI + kP s + kD s²`.
    pub fn to_pid(&self, r: [f64; 3]) -> Result<PidGains> {
        match *self {
            GammaRegion::Hurwitz { sigma0 } => {
                let [r1, r2, r3] = r;
                Ok(PidGains {
                    kp: r3 - 2.0 * sigma0 * r2,
                    ki: r1 + sigma0 * sigma0 * r2 - sigma0 * r3,
                    kd: r2,
                })
            }
            GammaRegion::Circle { .. } => Err(Error::NotApplicable("PID gain mapping")),
        }
    }

    /// Inverse of [`GammaRegion::to_pid`].
    pub fn from_pid(&self, gains: PidGains) -> Result<[f64; 3]> {
        match *self {
            GammaRegion::Hurwitz { sigma0 } => {
                let r2 = gains.kd;
                let r3 = gains.kp + 2.0 * sigma0 * r2;
                let r1 = gains.ki - sigma0 * sigma0 * r2 + sigma0 * r3;
                Ok([r1, r2, r3])
            }
            GammaRegion::Circle { .. } => Err(Error::NotApplicable("PID gain mapping")),
        }
    }
}

impl fmt::Display for GammaRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            GammaRegion::Hurwitz { sigma0: 0.0 } => write!(f, "Hurwitz"),
            GammaRegion::Hurwitz { sigma0 } => write!(f, "Hurwitz(σ0 = {sigma0})"),
            GammaRegion::Circle { m, rho } if m == 0.0 && rho == 1.0 => write!(f, "Schur"),
            GammaRegion::Circle { m, rho } => write!(f, "circle(m = {m}, ρ = {rho})"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

/// Basis polynomials multiplying `(r1, r2, r3)` in `Q`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QBasis {
    pub delta1: RealPoly,
    pub delta2: RealPoly,
    pub delta3: RealPoly,
}

impl QBasis {
    pub fn new(delta1: RealPoly, delta2: RealPoly, delta3: RealPoly) -> Self {
        QBasis {
            delta1,
            delta2,
            delta3,
        }
    }

    /// `Q(z) = δ1 r1 + δ2 r2 + δ3 r3` as a polynomial.
    pub fn q(&self, r: [f64; 3]) -> RealPoly {
        &(&self.delta1.scale(r[0]) + &self.delta2.scale(r[1])) + &self.delta3.scale(r[2])
    }

    pub fn eval(&self, z: Complex64) -> [Complex64; 3] {
        [
            self.delta1.eval_complex(z),
            self.delta2.eval_complex(z),
            self.delta3.eval_complex(z),
        ]
    }

    /// The basis in controller order `(kI, kP, kD)`; only differs from the
    /// r-order for Hurwitz regions.
    pub fn pid_order(&self) -> [&RealPoly; 3] {
        [&self.delta1, &self.delta3, &self.delta2]
    }
}

pub fn q_basis(region: &GammaRegion) -> QBasis {
    match *region {
        GammaRegion::Hurwitz { sigma0 } => QBasis::new(
            RealPoly::constant(1.0),
            RealPoly::new(vec![sigma0 * sigma0, -2.0 * sigma0, 1.0]),
            RealPoly::new(vec![-sigma0, 1.0]),
        ),
        GammaRegion::Circle { m, rho } => QBasis::new(
            RealPoly::new(vec![rho * rho - m * m, 0.0, 1.0]),
            RealPoly::new(vec![-m, 1.0]),
            RealPoly::constant(1.0),
        ),
    }
}

/// Matrix `T` with `c = T r`, where `c` are the coefficients of
/// `Q = c1 + c2 z + c3 z²`.
pub fn transform_matrix(region: &GammaRegion) -> Result<[[f64; 3]; 3]> {
    match *region {
        GammaRegion::Hurwitz { .. } => Err(Error::NotApplicable("transform matrix")),
        GammaRegion::Circle { m, rho } => Ok([
            [rho * rho - m * m, -m, 1.0],
            [0.0, 1.0, 0.0],
            [1.0, 0.0, 0.0],
        ]),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecouplingChoice {
    /// 1 for Hurwitz regions, `z - m` for circles.
    #[default]
    Default,
    /// `E = 1`; Hurwitz only.
    Unit,
    /// `E = z - m`; circles only.
    Linear,
    /// `E = ρ² - m² + z²`; circles only.
    Quadratic,
}

impl fmt::Display for DecouplingChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DecouplingChoice::Default => "default",
            DecouplingChoice::Unit => "unit",
            DecouplingChoice::Linear => "linear",
            DecouplingChoice::Quadratic => "quadratic",
        };
        f.write_str(s)
    }
}

pub fn decoupling_function(region: &GammaRegion, choice: DecouplingChoice) -> Result<RealPoly> {
    match (*region, choice) {
        (GammaRegion::Hurwitz { .. }, DecouplingChoice::Default | DecouplingChoice::Unit) => {
            Ok(RealPoly::constant(1.0))
        }
        (GammaRegion::Circle { m, .. }, DecouplingChoice::Default | DecouplingChoice::Linear) => {
            Ok(RealPoly::new(vec![-m, 1.0]))
        }
        (GammaRegion::Circle { m, rho }, DecouplingChoice::Quadratic) => {
            Ok(RealPoly::new(vec![rho * rho - m * m, 0.0, 1.0]))
        }
        _ => Err(Error::InvalidChoice {
            choice: choice.to_string(),
            region: region.to_string(),
        }),
    }
}

fn boundary_samples(region: &GammaRegion, samples: usize) -> Vec<Complex64> {
    let n = samples.max(16);
    (0..n)
        .map(|k| {
            let u = (k as f64 + 0.5) / n as f64;
            match *region {
                GammaRegion::Hurwitz { .. } => {
                    let theta = -PI / 2.0 + PI * u;
                    region.boundary_point(theta.tan())
                }
                GammaRegion::Circle { .. } => region.boundary_point(-PI + 2.0 * PI * u),
            }
        })
        .collect()
}

fn rank_one(col1: Complex64, col2: Complex64) -> bool {
    let scale = col1.norm() * col2.norm();
    if col1.norm() == 0.0 && col2.norm() == 0.0 {
        return false;
    }
    // det of [[Re c1, Re c2], [Im c1, Im c2]]
    let det = (col1.conj() * col2).im;
    det.abs() <= 1e-9 * scale
}

/// Sampled check that `∂(H, G)/∂(r1, r2)` has rank one on the boundary.
pub fn check_rank_condition(region: &GammaRegion, basis: &QBasis, samples: usize) -> bool {
    boundary_samples(region, samples).into_iter().all(|z| {
        let [d1, d2, _] = basis.eval(z);
        rank_one(d1, d2)
    })
}

/// Same check with the plant factor `A` included in the Jacobian columns.
pub fn check_rank_condition_with_plant(
    region: &GammaRegion,
    basis: &QBasis,
    a: &RealPoly,
    samples: usize,
) -> bool {
    boundary_samples(region, samples).into_iter().all(|z| {
        let az = a.eval_complex(z);
        let [d1, d2, _] = basis.eval(z);
        rank_one(az * d1, az * d2)
    })
}
