//! JSON plant files.
//!
//! A file holds the loop polynomials of `p = A·Q + B` (or `A·Q + B·e^{Ls}`)
//! directly, coefficients in ascending powers:
//!
//! ```json
//! { "plant": { "domain": "continuous", "a": [1, -2, 0, -7, -0.5],
//!              "b": [0, 24, 74, 109, 95, 46, 11, 1] },
//!   "region": { "kind": "hurwitz", "sigma0": 0 } }
//! ```
//!
//! Several representants go under `"plants": [...]`. For a unity-feedback
//! PID loop around `G = num/den` the polynomials are `A = num`,
//! `B = s·den`; see [`from_transfer_function`].

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gamma_region::GammaRegion;
use crate::plant::{Domain, PlantModel};
use crate::polynomial::RealPoly;
use crate::robust::PlantFamily;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantEntry {
    pub domain: Domain,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delay: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controller: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<GammaRegion>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plant: Option<PlantEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub plants: Vec<PlantEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<GammaRegion>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controller: Option<String>,
}

impl PlantFile {
    pub fn entries(&self) -> impl Iterator<Item = &PlantEntry> {
        self.plant.iter().chain(&self.plants)
    }

    /// Validated family; `origin` names the source in error messages.
    pub fn to_family(&self, origin: &Path) -> Result<PlantFamily> {
        let fail = |message: String| Error::PlantFile {
            path: origin.to_path_buf(),
            message,
        };
        let entries: Vec<&PlantEntry> = self.entries().collect();
        if entries.is_empty() {
            return Err(fail("no plant entries (expected \"plant\" or \"plants\")".into()));
        }
        let mut members = Vec::with_capacity(entries.len());
        let mut region = self.region;
        let mut domain = None;
        for (i, e) in entries.iter().enumerate() {
            let field = if self.plant.is_some() && i == 0 {
                "plant".to_string()
            } else {
                format!("plants[{}]", i - usize::from(self.plant.is_some()))
            };
            let plant = entry_model(e).map_err(|m| fail(format!("{field}: {m}")))?;
            let dom_kind = matches!(e.domain, Domain::Discrete);
            match domain {
                None => domain = Some(dom_kind),
                Some(d) if d != dom_kind => {
                    return Err(fail(format!("{field}: mixes discrete and continuous-time plants")));
                }
                _ => {}
            }
            if let Some(r) = e.region {
                match region {
                    Some(prev) if prev != r => {
                        return Err(fail(format!("{field}: region override conflicts with {prev}")));
                    }
                    _ => region = Some(r),
                }
            }
            members.push(plant);
        }
        let region = region.unwrap_or_else(|| members[0].default_region());
        PlantFamily::new(members, region).map_err(|e| fail(e.to_string()))
    }
}

fn entry_model(e: &PlantEntry) -> std::result::Result<PlantModel, String> {
    if e.a.is_empty() {
        return Err("field `a`: coefficient list is empty".into());
    }
    if e.b.is_empty() {
        return Err("field `b`: coefficient list is empty".into());
    }
    if let Some(k) = e.a.iter().chain(&e.b).position(|c| !c.is_finite()) {
        return Err(format!("coefficient #{k} is not finite"));
    }
    let (a, b) = (RealPoly::new(e.a.clone()), RealPoly::new(e.b.clone()));
    match (e.domain, e.delay) {
        (Domain::Delay, Some(l)) => PlantModel::with_delay(a, b, l).map_err(|err| err.to_string()),
        (Domain::Delay, None) => Err("field `delay`: required when domain is \"delay\"".into()),
        (_, Some(_)) => Err("field `delay`: only allowed when domain is \"delay\"".into()),
        (d, None) => PlantModel::new(a, b, d).map_err(|err| err.to_string()),
    }
}

pub fn parse_plant_str(text: &str, origin: &Path) -> Result<PlantFamily> {
    let file: PlantFile = serde_json::from_str(text).map_err(|e| Error::PlantFile {
        path: origin.to_path_buf(),
        message: e.to_string(),
    })?;
    file.to_family(origin)
}

pub fn parse_plant_file(path: impl AsRef<Path>) -> Result<PlantFamily> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_plant_str(&text, path)
}

/// `(A, B)` of a unity-feedback PID loop around `G = num/den`: the closed
/// loop `s·den + num·(kI + kP s + kD s²)` is `A·Q + B` with `A = num`,
/// `B = s·den`. With a plant delay `e^{-Ls}` the same pair multiplies out
/// to `A·Q + B·e^{Ls}`.
pub fn from_transfer_function(num: &[f64], den: &[f64], delay: Option<f64>) -> Result<PlantModel> {
    if num.is_empty() || den.is_empty() {
        return Err(Error::Degree("numerator and denominator must be nonempty".into()));
    }
    let a = RealPoly::new(num.to_vec());
    let b = &RealPoly::monomial(1.0, 1) * &RealPoly::new(den.to_vec());
    match delay {
        Some(l) => PlantModel::with_delay(a, b, l),
        None => PlantModel::new(a, b, Domain::Continuous),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<PlantFamily> {
        parse_plant_str(text, Path::new("test.json"))
    }

    #[test]
    fn single_plant_with_default_region() {
        let f = parse(r#"{"plant": {"domain": "discrete", "a": [1, 2], "b": [0, 0, 0, 1]}}"#).unwrap();
        assert_eq!(f.members.len(), 1);
        assert_eq!(f.region, GammaRegion::schur());
    }

    #[test]
    fn constant_a_is_valid() {
        let f = parse(r#"{"plant": {"domain": "continuous", "a": [1], "b": [0, 2, -1, -3, 1, 1]}}"#).unwrap();
        assert_eq!(f.members[0].m(), 0);
    }

    #[test]
    fn delay_without_principal_term() {
        let e = parse(r#"{"plant": {"domain": "delay", "a": [1, 1], "b": [0, 1, 1], "delay": 1}}"#).unwrap_err();
        assert!(e.to_string().contains("principal term"), "{e}");
    }

    #[test]
    fn delay_needs_delay_domain() {
        let e = parse(r#"{"plant": {"domain": "continuous", "a": [1], "b": [0, 1, 1], "delay": 1}}"#).unwrap_err();
        assert!(e.to_string().contains("delay"), "{e}");
    }

    #[test]
    fn empty_and_malformed() {
        assert!(parse(r#"{"plants": []}"#).is_err());
        let e = parse(r#"{"plant": {"domain": "continuous", "a": []}}"#).unwrap_err();
        assert!(e.to_string().contains("line"), "{e}");
        let e = parse(r#"{"plant": {"domain": "continuous", "a": [], "b": [1]}}"#).unwrap_err();
        assert!(e.to_string().contains("`a`"), "{e}");
    }

    #[test]
    fn transfer_function_helper() {
        let p = from_transfer_function(&[1.0], &[1.0, 1.0], None).unwrap();
        assert_eq!(p.b.coeffs(), &[0.0, 1.0, 1.0]);
    }
}
