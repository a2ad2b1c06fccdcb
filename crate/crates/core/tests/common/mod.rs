#![allow(dead_code)]

use std::path::PathBuf;

use pidregion_core::plantfile::parse_plant_file;
use pidregion_core::robust::PlantFamily;
use pidregion_core::{GammaRegion, PlantModel, QuasiPlant};

pub fn plant_path(name: &str) -> PathBuf {
    PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../plants")).join(name)
}

pub fn family(name: &str) -> PlantFamily {
    parse_plant_file(plant_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn example(k: usize) -> (PlantModel, GammaRegion) {
    let f = family(&format!("example{k}.json"));
    (f.members[0].clone(), f.region)
}

pub fn example7() -> QuasiPlant {
    example(7).0.as_quasi().expect("delay plant")
}

pub fn assert_close(got: f64, want: f64, tol: f64) {
    assert!((got - want).abs() <= tol, "got {got}, want {want} ± {tol}");
}
