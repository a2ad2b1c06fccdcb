//! Stacks of `r3` slices over the admissible intervals, with a versioned
//! JSON dump and per-slice SVG export.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gamma_region::GammaRegion;
use crate::geometry::{BBox, Point};
use crate::kp_analysis::{stability_peaks, KpInterval, StabilityPeak};
use crate::plant::PlantModel;
use crate::render::slice_svg;
use crate::robust::{member_slice, robust_intervals, robust_slice, PlantFamily};
use crate::slicing::{Slice, SingularFrequency};

pub const SCHEMA_VERSION: &str = "pidregion/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridConfig {
    pub per_interval_count: usize,
    pub refine_depth: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            per_interval_count: 30,
            refine_depth: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineRecord {
    pub h1: f64,
    pub h2: f64,
    pub h0: f64,
    pub e1: i8,
    pub e2: i8,
    pub omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub member: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolygonCensus {
    /// Eigenvalues outside the region (right half-plane zeros for delay loops).
    pub unstable: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inside: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub on_boundary: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outside: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolygonRecord {
    pub vertices: Vec<Point>,
    pub verified: bool,
    /// Part of the polygon was cut off by the slice's bounding box.
    #[serde(default)]
    pub truncated: bool,
    pub census: Option<PolygonCensus>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceRecord {
    pub r3: f64,
    /// Index into `Region3D::intervals`; `None` marks an out-of-interval probe.
    pub interval: Option<usize>,
    pub bbox: BBox,
    pub frequencies: Vec<SingularFrequency>,
    pub lines: Vec<LineRecord>,
    pub polygons: Vec<PolygonRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    /// Set when the slice computation failed; the sweep continues.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl SliceRecord {
    pub fn from_slice(slice: &Slice, interval: Option<usize>) -> Self {
        let lines = slice
            .lines
            .iter()
            .map(|l| LineRecord {
                h1: l.h1,
                h2: l.h2,
                h0: l.h0,
                e1: l.e1,
                e2: l.e2,
                omega: l.omega,
                member: None,
            })
            .collect();
        let polygons = slice
            .stable_faces()
            .map(|f| PolygonRecord {
                vertices: f.polygon.vertices.clone(),
                verified: f.check.as_ref().is_some_and(|c| c.unstable == 0 && c.clean),
                truncated: f.truncated,
                census: f.check.as_ref().map(|c| PolygonCensus {
                    unstable: c.unstable,
                    inside: c.census.as_ref().map(|k| k.inside),
                    on_boundary: c.census.as_ref().map(|k| k.on_boundary),
                    outside: c.census.as_ref().map(|k| k.outside),
                }),
            })
            .collect();
        SliceRecord {
            r3: slice.r3,
            interval,
            bbox: slice.bbox,
            frequencies: slice.frequencies.clone(),
            lines,
            polygons,
            notes: slice.diagnostics.iter().map(|d| format!("{d:?}")).collect(),
            error: None,
        }
    }

    fn failed(r3: f64, interval: Option<usize>, err: &Error) -> Self {
        SliceRecord {
            r3,
            interval,
            bbox: BBox::square(1.0),
            frequencies: Vec::new(),
            lines: Vec::new(),
            polygons: Vec::new(),
            notes: Vec::new(),
            error: Some(err.to_string()),
        }
    }

    pub fn area(&self) -> f64 {
        self.polygons
            .iter()
            .map(|p| crate::geometry::Polygon::new(p.vertices.clone()).area())
            .sum()
    }

    /// Polygon count and sorted vertex counts; refinement splits where this
    /// changes between neighbours.
    pub fn topology(&self) -> (usize, Vec<usize>) {
        let mut v: Vec<usize> = self.polygons.iter().map(|p| p.vertices.len()).collect();
        v.sort_unstable();
        (self.polygons.len(), v)
    }
}

/// Slice of a family at one `r3`: the member's own slice for a single plant,
/// the verified robust intersection otherwise.
pub fn family_slice_record(family: &PlantFamily, r3: f64, interval: Option<usize>) -> Result<SliceRecord> {
    if family.len() == 1 {
        let s = member_slice(&family.members[0], &family.region, r3)?;
        return Ok(SliceRecord::from_slice(&s, interval));
    }
    let rs = robust_slice(family, r3)?;
    let mut frequencies = Vec::new();
    let mut lines = Vec::new();
    let mut bbox = rs.members[0].bbox;
    for (k, s) in rs.members.iter().enumerate() {
        let rec = SliceRecord::from_slice(s, interval);
        frequencies.extend(rec.frequencies);
        lines.extend(rec.lines.into_iter().map(|l| LineRecord { member: Some(k), ..l }));
        bbox = BBox {
            x_min: bbox.x_min.min(s.bbox.x_min),
            x_max: bbox.x_max.max(s.bbox.x_max),
            y_min: bbox.y_min.min(s.bbox.y_min),
            y_max: bbox.y_max.max(s.bbox.y_max),
        };
    }
    Ok(SliceRecord {
        r3,
        interval,
        bbox,
        frequencies,
        lines,
        polygons: rs
            .polygons
            .into_iter()
            .map(|p| PolygonRecord {
                vertices: p.polygon.vertices,
                verified: true,
                truncated: false,
                census: None,
            })
            .collect(),
        notes: rs.notes,
        error: None,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region3D {
    pub version: String,
    pub plants: Vec<PlantModel>,
    pub region: GammaRegion,
    pub grid: GridConfig,
    pub intervals: Vec<KpInterval>,
    pub peaks: Vec<StabilityPeak>,
    pub slices: Vec<SliceRecord>,
}

impl Region3D {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: Region3D = serde_json::from_str(text)?;
        if r.version != SCHEMA_VERSION {
            return Err(Error::Domain(format!("unsupported region schema {:?}", r.version)));
        }
        Ok(r)
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }
}

/// Uniform grid of `n` points strictly inside `(lo, hi)`.
fn interior_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (1..=n).map(|i| lo + (hi - lo) * i as f64 / (n + 1) as f64).collect()
}

fn compute_all(family: &PlantFamily, keys: &[(f64, Option<usize>)]) -> Vec<SliceRecord> {
    keys.par_iter()
        .map(|&(r3, iv)| family_slice_record(family, r3, iv).unwrap_or_else(|e| SliceRecord::failed(r3, iv, &e)))
        .collect()
}

/// Slice stack over the admissible (or robust) intervals of `family`.
///
/// Each interval gets `per_interval_count` uniform slices; then, up to
/// `refine_depth` times, a midpoint slice is added between neighbours whose
/// topology differs. Interval endpoints count as empty neighbours and
/// stability peaks as always-different ones, so refinement concentrates
/// where polygons close.
pub fn build_region(family: &PlantFamily, grid: GridConfig) -> Result<Region3D> {
    if grid.per_interval_count < 3 {
        return Err(Error::Precondition(format!(
            "per_interval_count must be at least 3, got {}",
            grid.per_interval_count
        )));
    }
    let region = family.region;
    let intervals = robust_intervals(family, None)?;
    let mut peaks = Vec::new();
    let plant = &family.members[0];
    if family.len() == 1 && region.is_hurwitz() && !plant.is_delay() && plant.nominal_degree() > 6 {
        for iv in &intervals {
            if let Ok(p) = stability_peaks(plant, &region, iv) {
                peaks.extend(p);
            }
        }
    }

    let keys: Vec<(f64, Option<usize>)> = intervals
        .iter()
        .enumerate()
        .flat_map(|(i, iv)| interior_grid(iv.lo, iv.hi, grid.per_interval_count).into_iter().map(move |r| (r, Some(i))))
        .collect();
    let mut slices: BTreeMap<u64, SliceRecord> = BTreeMap::new();
    let key = |r3: f64| ordered_bits(r3);
    for rec in compute_all(family, &keys) {
        slices.insert(key(rec.r3), rec);
    }

    for _ in 0..grid.refine_depth {
        let mut new_keys = Vec::new();
        for (i, iv) in intervals.iter().enumerate() {
            // (r3, topology) sequence including virtual endpoint/peak markers.
            let mut seq: Vec<(f64, Option<(usize, Vec<usize>)>)> = vec![(iv.lo, Some((0, Vec::new())))];
            seq.extend(
                slices
                    .values()
                    .filter(|s| s.interval == Some(i))
                    .map(|s| (s.r3, Some(s.topology()))),
            );
            seq.push((iv.hi, Some((0, Vec::new()))));
            seq.extend(peaks.iter().filter(|p| iv.contains(p.kp)).map(|p| (p.kp, None)));
            seq.sort_by(|a, b| a.0.total_cmp(&b.0));
            for w in seq.windows(2) {
                let differ = match (&w[0].1, &w[1].1) {
                    (Some(a), Some(b)) => a != b,
                    _ => true,
                };
                let mid = 0.5 * (w[0].0 + w[1].0);
                if differ && mid > w[0].0 && mid < w[1].0 && !slices.contains_key(&key(mid)) {
                    new_keys.push((mid, Some(i)));
                }
            }
        }
        if new_keys.is_empty() {
            break;
        }
        for rec in compute_all(family, &new_keys) {
            slices.insert(key(rec.r3), rec);
        }
    }

    Ok(Region3D {
        version: SCHEMA_VERSION.to_string(),
        plants: family.members.clone(),
        region,
        grid,
        intervals,
        peaks,
        slices: slices.into_values().collect(),
    })
}

/// Bit pattern whose unsigned order matches the numeric order of `x`.
fn ordered_bits(x: f64) -> u64 {
    let b = x.to_bits();
    if b >> 63 == 1 {
        !b
    } else {
        b | (1 << 63)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExportFormat {
    Json,
    SvgSlices,
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `region.json`, or one `slice_NNNN.svg` per slice, into `dir`.
pub fn export_region(region: &Region3D, format: ExportFormat, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    match format {
        ExportFormat::Json => {
            let path = dir.join("region.json");
            write_file(&path, &region.to_json()?)?;
            Ok(vec![path])
        }
        ExportFormat::SvgSlices => {
            let mut out = Vec::with_capacity(region.slices.len());
            for (i, s) in region.slices.iter().enumerate() {
                let path = dir.join(format!("slice_{i:04}.svg"));
                write_file(&path, &slice_svg(s, &region.region))?;
                out.push(path);
            }
            Ok(out)
        }
    }
}

pub fn import_region(path: &Path) -> Result<Region3D> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Region3D::from_json(&text)
}
