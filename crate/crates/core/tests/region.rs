mod common;

use common::{example, family};
use pidregion_core::kp_analysis::{admissible_intervals, stability_peaks};
use pidregion_core::region_builder::{
    build_region, export_region, family_slice_record, import_region, ExportFormat, GridConfig, Region3D,
};
use pidregion_core::render::slice_svg;
use pidregion_core::robust::PlantFamily;
use pidregion_core::slicing::compute_slice;

fn small_grid() -> GridConfig {
    GridConfig {
        per_interval_count: 6,
        refine_depth: 1,
    }
}

#[test]
fn example2_region_is_nonempty_at_probes() {
    let fam = family("example2.json");
    for r3 in [-20.0, -2.0, 5.0] {
        let rec = family_slice_record(&fam, r3, None).unwrap();
        assert!(!rec.polygons.is_empty(), "kP = {r3}");
        assert!(rec.polygons.iter().all(|p| p.verified));
    }
}

#[test]
fn example4_region_is_empty() {
    let region = build_region(&family("example4.json"), small_grid()).unwrap();
    assert!(region.is_empty());
    assert!(region.intervals.is_empty());
}

#[test]
fn example6_area_vanishes_at_the_peak() {
    let (p, r) = example(6);
    let cells = admissible_intervals(&p, &r, None).unwrap();
    let cell = cells.iter().find(|c| c.contains(-9.0)).unwrap();
    let peak = stability_peaks(&p, &r, cell).unwrap()[0].kp;
    let areas: Vec<f64> = [0.1, 0.01, 0.001]
        .iter()
        .map(|d| compute_slice(&p, &r, peak + d).unwrap().stable_area())
        .collect();
    assert!(areas.windows(2).all(|w| w[1] < w[0]), "{areas:?}");
    assert!(areas[2] < 1e-3 * areas[0], "{areas:?}");
    assert_eq!(compute_slice(&p, &r, peak - 0.01).unwrap().stable_count(), 0);
}

#[test]
fn json_round_trip_is_exact() {
    let region = build_region(&family("example2.json"), small_grid()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = export_region(&region, ExportFormat::Json, dir.path()).unwrap();
    let back = import_region(&files[0]).unwrap();
    assert_eq!(back, region);
    assert_eq!(back.to_json().unwrap(), region.to_json().unwrap());
    assert!(Region3D::from_json(&region.to_json().unwrap().replace("pidregion/1", "pidregion/0")).is_err());
}

#[test]
fn example1_svg() {
    let fam = family("example1.json");
    let rec = family_slice_record(&fam, -0.26118, None).unwrap();
    let svg = slice_svg(&rec, &fam.region);
    assert_eq!(svg.matches(r#"class="stable""#).count(), 1);
    assert!(svg.matches(r#"class="boundary""#).count() >= 3);
    assert!(svg.starts_with("<?xml") && svg.trim_end().ends_with("</svg>"));
}

#[test]
fn area_is_continuous_and_closes_monotonically() {
    let (p, r) = example(2);
    let area = |r3: f64| compute_slice(&p, &r, r3).unwrap().stable_area();
    // Neighbouring slices inside a cell differ little.
    for r3 in [-15.0, -1.0, 5.0] {
        let (a, b) = (area(r3), area(r3 + 1e-4));
        assert!((a - b).abs() < 1e-2 * a.max(1.0), "{r3}: {a} vs {b}");
    }
    // Toward both ends of the admissible union the area shrinks to zero.
    let low: Vec<f64> = [-20.0, -23.0, -23.9, -23.99].iter().map(|&x| area(x)).collect();
    let high: Vec<f64> = [5.0, 6.0, 6.15, 6.156].iter().map(|&x| area(x)).collect();
    for v in [&low, &high] {
        assert!(v.windows(2).all(|w| w[1] < w[0]), "{v:?}");
        assert!(v[3] < 0.05 * v[0], "{v:?}");
    }
}

#[test]
fn builds_are_deterministic() {
    let fam: PlantFamily = family("family_example2.json");
    let a = build_region(&fam, small_grid()).unwrap().to_json().unwrap();
    let b = build_region(&fam, small_grid()).unwrap().to_json().unwrap();
    assert_eq!(a, b);
}

#[test]
fn region_slices_stay_inside_intervals() {
    let region = build_region(&family("example3.json"), small_grid()).unwrap();
    assert_eq!(region.intervals.len(), 2);
    for s in &region.slices {
        let i = s.interval.expect("interval index");
        let c = &region.intervals[i];
        assert!(s.r3 > c.lo && s.r3 < c.hi);
        assert!(s.error.is_none());
    }
}
