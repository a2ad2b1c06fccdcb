use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gamma_region::{q_basis, GammaRegion};
use crate::polynomial::{root_census, RealPoly, RootCensus, DEFAULT_BOUNDARY_TOL};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Continuous,
    Discrete,
    Delay,
}

/// One loop representant: `p = A·Q + B` (or `A·Q + B·e^{Ls}` with a delay).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantModel {
    pub a: RealPoly,
    pub b: RealPoly,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delay: Option<f64>,
    pub domain: Domain,
}

impl PlantModel {
    pub fn new(a: RealPoly, b: RealPoly, domain: Domain) -> Result<Self> {
        if a.is_zero() {
            return Err(Error::Degree("A must be a nonzero polynomial".into()));
        }
        if domain == Domain::Delay {
            return Err(Error::Precondition(
                "delay plants need a delay; use PlantModel::with_delay".into(),
            ));
        }
        Ok(PlantModel {
            a,
            b,
            delay: None,
            domain,
        })
    }

    pub fn continuous(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        PlantModel::new(RealPoly::new(a), RealPoly::new(b), Domain::Continuous)
    }

    pub fn discrete(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        PlantModel::new(RealPoly::new(a), RealPoly::new(b), Domain::Discrete)
    }

    pub fn with_delay(a: RealPoly, b: RealPoly, delay: f64) -> Result<Self> {
        QuasiPlant::new(a.clone(), b.clone(), delay)?;
        Ok(PlantModel {
            a,
            b,
            delay: Some(delay),
            domain: Domain::Delay,
        })
    }

    pub fn default_region(&self) -> GammaRegion {
        match self.domain {
            Domain::Discrete => GammaRegion::schur(),
            Domain::Continuous | Domain::Delay => GammaRegion::hurwitz(),
        }
    }

    /// `m = deg A`.
    pub fn m(&self) -> usize {
        self.a.degree()
    }

    /// `n = deg B` (0 for `B = 0`).
    pub fn n(&self) -> usize {
        self.b.degree()
    }

    /// Order `N` of the closed-loop polynomial for generic parameters.
    pub fn nominal_degree(&self) -> usize {
        (self.m() + 2).max(self.n())
    }

    pub fn is_delay(&self) -> bool {
        self.delay.is_some()
    }

    pub fn as_quasi(&self) -> Option<QuasiPlant> {
        self.delay.map(|l| QuasiPlant {
            a: self.a.clone(),
            b: self.b.clone(),
            l,
        })
    }

    /// `A·Q(r) + B` for the basis of `region`.
    pub fn closed_loop(&self, region: &GammaRegion, r: [f64; 3]) -> RealPoly {
        &(&self.a * &q_basis(region).q(r)) + &self.b
    }

    pub fn census(&self, region: &GammaRegion, r: [f64; 3]) -> Result<RootCensus> {
        root_census(&self.closed_loop(region, r), region, DEFAULT_BOUNDARY_TOL)
    }
}

/// Plant with input delay: `p = A(s)(kI + kP s + kD s²) + B(s)e^{Ls}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiPlant {
    pub a: RealPoly,
    pub b: RealPoly,
    pub l: f64,
}

impl QuasiPlant {
    pub fn new(a: RealPoly, b: RealPoly, l: f64) -> Result<Self> {
        if a.is_zero() || b.is_zero() {
            return Err(Error::Degree("A and B must be nonzero".into()));
        }
        if !(l > 0.0) || !l.is_finite() {
            return Err(Error::Domain(format!("delay must be positive, got {l}")));
        }
        if b.degree() < a.degree() + 2 {
            return Err(Error::Degree(format!(
                "no principal term: e^(Ls) must multiply the highest power of s \
                 (need deg B >= deg A + 2, got deg B = {}, deg A = {})",
                b.degree(),
                a.degree()
            )));
        }
        Ok(QuasiPlant { a, b, l })
    }

    pub fn is_neutral(&self) -> bool {
        self.b.degree() == self.a.degree() + 2
    }

    pub fn to_model(&self) -> PlantModel {
        PlantModel {
            a: self.a.clone(),
            b: self.b.clone(),
            delay: Some(self.l),
            domain: Domain::Delay,
        }
    }
}
