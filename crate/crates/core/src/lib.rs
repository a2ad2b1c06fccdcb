//! Stabilizing PID and three-term controller regions as stacks of convex
//! polygonal slices in `(r1, r2, r3)` parameter space.

pub mod curve;
pub mod delay;
pub mod error;
pub mod geometry;
pub mod kp_analysis;
pub mod gamma_region;
pub mod plant;
pub mod plantfile;
pub mod polynomial;
pub mod region_builder;
pub mod render;
pub mod robust;
pub mod slicing;

pub use error::{Error, Result};
pub use gamma_region::{
    check_rank_condition, decoupling_function, q_basis, transform_matrix, DecouplingChoice,
    GammaRegion, PidGains, QBasis,
};
pub use plant::{Domain, PlantModel, QuasiPlant};
pub use polynomial::{root_census, RealPoly, RootCensus};
