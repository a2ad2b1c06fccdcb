//! Simultaneous stabilization of a finite plant family.
//!
//! Every member shares the controller basis of one region, so the admissible
//! `r3` sets and the stable polygons of the members live in the same space
//! and can simply be intersected.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::delay::{delay_admissible_intervals, delay_partition, delay_slice, quasi_stability_check};
use crate::error::{Error, Result};
use crate::gamma_region::GammaRegion;
use crate::geometry::{Point, Polygon};
use crate::kp_analysis::{admissible_intervals, kp_partition, KpInterval, Sufficiency};
use crate::plant::PlantModel;
use crate::slicing::{compute_slice, is_stable_point, Slice};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantFamily {
    pub members: Vec<PlantModel>,
    pub region: GammaRegion,
}

impl PlantFamily {
    pub fn new(members: Vec<PlantModel>, region: GammaRegion) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::Precondition("plant family is empty".into()));
        }
        if members.iter().any(PlantModel::is_delay) && region != GammaRegion::hurwitz() {
            return Err(Error::NotApplicable("delay analysis outside the open left half-plane"));
        }
        Ok(PlantFamily { members, region })
    }

    pub fn single(plant: PlantModel, region: GammaRegion) -> Result<Self> {
        PlantFamily::new(vec![plant], region)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// All `r3` cells of one member; delay plants use the first window.
pub fn member_partition(
    plant: &PlantModel,
    region: &GammaRegion,
    search_range: Option<(f64, f64)>,
) -> Result<Vec<KpInterval>> {
    match plant.as_quasi() {
        Some(q) => delay_partition(&q, 1, None, search_range),
        None => kp_partition(plant, region, search_range),
    }
}

pub fn member_admissible(
    plant: &PlantModel,
    region: &GammaRegion,
    search_range: Option<(f64, f64)>,
) -> Result<Vec<KpInterval>> {
    match plant.as_quasi() {
        Some(q) => delay_admissible_intervals(&q, 1, None, search_range),
        None => admissible_intervals(plant, region, search_range),
    }
}

pub fn member_slice(plant: &PlantModel, region: &GammaRegion, r3: f64) -> Result<Slice> {
    match plant.as_quasi() {
        Some(q) => delay_slice(&q, r3, None),
        None => compute_slice(plant, region, r3),
    }
}

pub fn member_is_stable(plant: &PlantModel, region: &GammaRegion, r: [f64; 3]) -> Result<bool> {
    match plant.as_quasi() {
        Some(q) => quasi_stability_check(&q, r[0], r[2], r[1], 0.0),
        None => is_stable_point(plant, region, r),
    }
}

/// Intersection of the members' admissible `r3` cells. Robust cells carry
/// the smallest member `Z` and the largest requirement, plus the per-member
/// pairs.
pub fn robust_intervals(family: &PlantFamily, search_range: Option<(f64, f64)>) -> Result<Vec<KpInterval>> {
    let per_member: Vec<Vec<KpInterval>> = family
        .members
        .par_iter()
        .map(|p| member_admissible(p, &family.region, search_range))
        .collect::<Result<_>>()?;
    if per_member.len() == 1 {
        return Ok(per_member.into_iter().next().unwrap_or_default());
    }
    let mut acc: Vec<(f64, f64, Vec<(usize, i64)>, bool)> = per_member[0]
        .iter()
        .map(|c| (c.lo, c.hi, vec![(c.z, c.required_z)], c.sufficiency == Sufficiency::NecessaryAndSufficient))
        .collect();
    for cells in &per_member[1..] {
        let mut next = Vec::new();
        for (lo, hi, members, suff) in &acc {
            for c in cells {
                let (a, b) = (lo.max(c.lo), hi.min(c.hi));
                if b > a {
                    let mut m = members.clone();
                    m.push((c.z, c.required_z));
                    let s = *suff && c.sufficiency == Sufficiency::NecessaryAndSufficient;
                    next.push((a, b, m, s));
                }
            }
        }
        acc = next;
    }
    acc.sort_by(|x, y| x.0.total_cmp(&y.0));
    Ok(acc
        .into_iter()
        .map(|(lo, hi, members, suff)| KpInterval {
            lo,
            hi,
            z: members.iter().map(|m| m.0).min().unwrap_or(0),
            required_z: members.iter().map(|m| m.1).max().unwrap_or(0),
            admissible: true,
            sufficiency: if suff {
                Sufficiency::NecessaryAndSufficient
            } else {
                Sufficiency::NecessaryOnly
            },
            members,
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustPolygon {
    pub polygon: Polygon,
    pub rep: Point,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustSlice {
    pub r3: f64,
    pub polygons: Vec<RobustPolygon>,
    pub members: Vec<Slice>,
    pub notes: Vec<String>,
}

/// Intersection of the members' stable polygon sets at one `r3`, as the
/// nonempty pairwise intersections of their convex pieces. Each piece is
/// verified pointwise against every member.
pub fn robust_slice(family: &PlantFamily, r3: f64) -> Result<RobustSlice> {
    let region = family.region;
    let members: Vec<Slice> = family
        .members
        .par_iter()
        .map(|p| member_slice(p, &region, r3))
        .collect::<Result<_>>()?;
    let scale = members.iter().map(|s| s.bbox.size()).fold(0.0, f64::max).max(1.0);
    let min_area = 1e-12 * scale * scale;
    let mut pieces: Vec<Polygon> = members[0].stable_faces().map(|f| f.polygon.clone()).collect();
    for s in &members[1..] {
        let mut next = Vec::new();
        for p in &pieces {
            for f in s.stable_faces() {
                let q = p.intersect(&f.polygon);
                if q.vertices.len() >= 3 && q.area() > min_area {
                    next.push(q);
                }
            }
        }
        pieces = next;
    }
    pieces.sort_by(|a, b| {
        let (ca, cb) = (a.centroid(), b.centroid());
        ca[0].total_cmp(&cb[0]).then(ca[1].total_cmp(&cb[1]))
    });

    let mut notes = Vec::new();
    if family.len() > 1 {
        match robust_intervals(family, None) {
            Ok(cells) if !cells.iter().any(|c| c.contains(r3)) => {
                notes.push(format!("r3 = {r3} is outside every robust interval"));
            }
            Ok(_) => {}
            Err(e) => notes.push(format!("robust intervals unavailable: {e}")),
        }
    }

    let mut polygons = Vec::with_capacity(pieces.len());
    for (i, polygon) in pieces.into_iter().enumerate() {
        let (rep, _) = polygon.representative_point();
        for plant in &family.members {
            if !member_is_stable(plant, &region, [rep[0], rep[1], r3])? {
                return Err(Error::Consistency {
                    face: i,
                    propagated: 0,
                    verified: 1,
                });
            }
        }
        polygons.push(RobustPolygon { polygon, rep });
    }
    let overlapping = polygons.iter().enumerate().any(|(i, a)| {
        polygons[i + 1..]
            .iter()
            .any(|b| a.polygon.intersect(&b.polygon).area() > min_area)
    });
    if overlapping {
        notes.push("some robust polygons overlap; pieces are reported unmerged".into());
    }
    Ok(RobustSlice {
        r3,
        polygons,
        members,
        notes,
    })
}
