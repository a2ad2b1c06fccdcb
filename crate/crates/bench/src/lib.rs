//! Fixtures shared by the benchmarks in `benches/`.

use std::path::PathBuf;

use pidregion_core::plantfile::parse_plant_file;
use pidregion_core::robust::PlantFamily;

/// One of the bundled plant files under `plants/`.
pub fn plant(name: &str) -> PlantFamily {
    let path = PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../plants")).join(name);
    parse_plant_file(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}
