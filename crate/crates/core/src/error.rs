use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degree error: {0}")]
    Degree(String),

    #[error("{0} is not applicable to this region")]
    NotApplicable(&'static str),

    #[error("invalid decoupling function choice {choice} for {region}")]
    InvalidChoice { choice: String, region: String },

    /// The singular-frequency equation vanished identically for this r3.
    #[error("degenerate slice at r3 = {r3}: singular-frequency equation is identically zero")]
    DegenerateSlice { r3: f64 },

    #[error("A·E has a zero on the boundary at the singular frequency {param}")]
    SingularCancellation { param: f64 },

    #[error("dp/dz vanishes at the singular frequency {param}; transition undefined")]
    DegenerateEigenvalue { param: f64 },

    #[error(
        "census mismatch on face {face}: propagated {propagated} inside, verified {verified} inside"
    )]
    Consistency {
        face: usize,
        propagated: i64,
        verified: i64,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("A(jω) vanishes at ω = {omega}")]
    PoleOnAxis { omega: f64 },

    #[error("δ = {delta} makes the window edge fall on a phase crossing")]
    DeltaInvalid { delta: f64 },

    #[error("stability check inconclusive: min |p(jω)| margin {margin:e}")]
    Inconclusive { margin: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("plant file {path}: {message}")]
    PlantFile { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("root finder failed to converge on a degree {0} polynomial")]
    NoConvergence(usize),
}
